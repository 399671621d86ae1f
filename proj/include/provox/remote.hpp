#pragma once

// Chat-completions client. The transport is an interface so tests can replay
// recorded wire fixtures without touching the network.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "provox/planner.hpp"
#include "provox/synthesis.hpp"

namespace provox {

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws Error("BackendUnavailable") when no response arrives at all.
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(int timeout_seconds = 60) : timeout_seconds_(timeout_seconds) {}
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override;

 private:
  int timeout_seconds_;
};

// Request body: the assembled prompt as the user message, the derived tools,
// and one extra user message per correction.
nlohmann::json build_chat_request(const PlannerRequest& request, const BackendConfig& config,
                                  const std::vector<std::string>& corrections = {});

// Tool calls become a call list (submit_plan is flattened); plain text becomes
// a clarification, or done when it reads "DONE".
RawResponse decode_chat_response(const nlohmann::json& body, const Api& api);

class RemoteBackend final : public PlannerBackend {
 public:
  RemoteBackend(BackendConfig config, std::shared_ptr<HttpTransport> transport);

  PlannerResponse generate(const PlannerRequest& request) override;
  std::string_view name() const override { return "remote"; }

  // One round trip, decoded but not validated.
  RawResponse request_once(const PlannerRequest& request, const std::vector<std::string>& corrections);

 private:
  BackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

PlannerResponse remote_generate(const PlannerRequest& request, const BackendConfig& config,
                                const std::shared_ptr<HttpTransport>& transport);

// Asks the model for a function name and docstring as a JSON object.
class RemoteNamer final : public NameDocProvider {
 public:
  RemoteNamer(BackendConfig config, std::shared_ptr<HttpTransport> transport);
  NameDoc name_and_doc(const TeachExample& example, const LiftingCandidate& lifting,
                       const Catalog& objects) override;

 private:
  BackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

std::unique_ptr<PlannerBackend> make_backend(const BackendConfig& config,
                                             std::shared_ptr<HttpTransport> transport = nullptr);
std::unique_ptr<NameDocProvider> make_namer(const BackendConfig& config,
                                            std::shared_ptr<HttpTransport> transport = nullptr);

PlannerResponse generate(const PlannerRequest& request, const BackendConfig& config);

}  // namespace provox
