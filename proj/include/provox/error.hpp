#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace provox {

// Every failure the library reports carries a stable machine-readable code
// ("UnknownFunction", "WrongState", ...). The service layer forwards the code
// verbatim in its JSON error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message,
        std::vector<std::string> subjects = {})
      : std::runtime_error(message),
        code_(std::move(code)),
        subjects_(std::move(subjects)) {}

  const std::string& code() const noexcept { return code_; }

  // Names the error is about, e.g. the referencing functions of
  // ReferencedByOthers.
  const std::vector<std::string>& subjects() const noexcept { return subjects_; }

 private:
  std::string code_;
  std::vector<std::string> subjects_;
};

}  // namespace provox
