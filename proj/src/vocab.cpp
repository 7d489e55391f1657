#include "uniex/vocab.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace uniex {

Vocabulary::Vocabulary() {
  for (const char* w : {"[PAD]", "[UNK]", "[D-TOK]", "[C-TOK]", "[A-TOK]", "[SEP]"}) push(w);
  for (std::size_t k = 0; k < kPlaceholderCount; ++k) push("[unused" + std::to_string(k) + "]");
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  Vocabulary v;
  std::set<std::string> sorted(words.begin(), words.end());
  for (const auto& w : sorted) {
    if (!v.contains(w)) v.push(w);
  }
  return v;
}

void Vocabulary::push(const std::string& word) {
  index_.emplace(word, words_.size());
  words_.push_back(word);
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::size_t Vocabulary::placeholder(std::size_t label_index) const {
  if (label_index >= kPlaceholderCount) {
    throw std::out_of_range("no placeholder token for label " + std::to_string(label_index));
  }
  return kPlaceholderBase + label_index;
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<std::size_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

nlohmann::json Vocabulary::to_json() const {
  return nlohmann::json(std::vector<std::string>(words_.begin() + kReserved, words_.end()));
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  for (const auto& w : j) v.push(w.get<std::string>());
  return v;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace uniex
