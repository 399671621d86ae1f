#include "provox/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace provox::text {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_word_boundary(std::string_view s, std::size_t pos) { return pos >= s.size() || s[pos] == ' '; }

std::optional<Mention> find_phrase(std::string_view haystack, std::string_view phrase) {
  if (phrase.empty()) return std::nullopt;
  std::size_t pos = haystack.find(phrase);
  while (pos != std::string_view::npos) {
    const bool starts = pos == 0 || haystack[pos - 1] == ' ';
    if (starts && is_word_boundary(haystack, pos + phrase.size())) return Mention{pos, phrase.size()};
    pos = haystack.find(phrase, pos + 1);
  }
  return std::nullopt;
}

std::string trim_spaces(std::string s) {
  const auto first = s.find_first_not_of(' ');
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(' ');
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string out(text.size(), ' ');
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_alnum(c)) out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> tokens(std::string_view text) {
  std::istringstream in(normalize(text));
  std::vector<std::string> out;
  for (std::string word; in >> word;) out.push_back(word);
  return out;
}

std::optional<Mention> find_mention(std::string_view utterance, const ObjectRef& object) {
  const std::string haystack = normalize(utterance);
  std::vector<std::string> phrases;
  phrases.push_back(trim_spaces(normalize(object.display_name)));
  for (const auto& alias : object.aliases) phrases.push_back(trim_spaces(normalize(alias)));

  std::optional<Mention> best;
  for (const auto& phrase : phrases) {
    const auto hit = find_phrase(haystack, phrase);
    if (!hit) continue;
    if (!best || hit->offset < best->offset || (hit->offset == best->offset && hit->length > best->length)) best = hit;
  }
  return best;
}

std::vector<ObjectMention> mentioned_objects(std::string_view utterance, const Catalog& objects) {
  std::vector<ObjectMention> out;
  for (const auto& obj : objects.objects()) {
    if (auto m = find_mention(utterance, obj)) out.push_back({&obj, *m});
  }
  std::stable_sort(out.begin(), out.end(), [](const ObjectMention& a, const ObjectMention& b) {
    if (a.mention.offset != b.mention.offset) return a.mention.offset < b.mention.offset;
    return a.mention.length > b.mention.length;
  });
  return out;
}

std::string stem(std::string_view word) {
  std::string w(word);
  for (std::string_view suffix : {"ing", "ed", "es", "s"}) {
    if (w.size() > suffix.size() + 2 && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0) {
      w.resize(w.size() - suffix.size());
      break;
    }
  }
  return w;
}

std::vector<std::string> identifier_words(std::string_view name) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(current);
    current.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (c == '_' || !is_alnum(c)) {
      flush();
      continue;
    }
    if (std::isupper(static_cast<unsigned char>(c)) && i > 0 && std::islower(static_cast<unsigned char>(name[i - 1])))
      flush();
    current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  flush();
  return words;
}

}  // namespace provox::text
