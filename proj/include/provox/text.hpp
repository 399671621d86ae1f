#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "provox/dsl.hpp"

namespace provox::text {

// Lowercases ASCII letters and maps every other non-alphanumeric byte to a
// space. Length is preserved, so offsets in the result index the input.
std::string normalize(std::string_view text);

// Whitespace-separated tokens of normalize(text).
std::vector<std::string> tokens(std::string_view text);

struct Mention {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Earliest (then longest) whole-word occurrence of the object's display name
// or any alias in the utterance.
std::optional<Mention> find_mention(std::string_view utterance, const ObjectRef& object);

struct ObjectMention {
  const ObjectRef* object = nullptr;
  Mention mention;
};

// Objects mentioned in the utterance, ordered by mention offset.
std::vector<ObjectMention> mentioned_objects(std::string_view utterance, const Catalog& objects);

// Crude verb stem used for matching "packing" against "pack".
std::string stem(std::string_view word);

// Splits snake_case and camelCase identifiers into lowercase words.
std::vector<std::string> identifier_words(std::string_view name);

}  // namespace provox::text
