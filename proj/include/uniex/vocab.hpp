#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace uniex {

// Word-level vocabulary. Reserved ids come first and never collide with
// corpus words; the remaining words are sorted so the same corpus always
// yields the same ids.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kDetectId = 2;     // [D-TOK]
  static constexpr std::size_t kClassifyId = 3;   // [C-TOK]
  static constexpr std::size_t kAssociateId = 4;  // [A-TOK]
  static constexpr std::size_t kSep = 5;
  static constexpr std::size_t kPlaceholderBase = 6;
  static constexpr std::size_t kPlaceholderCount = 64;  // [unused0] .. [unused63]
  static constexpr std::size_t kReserved = kPlaceholderBase + kPlaceholderCount;

  Vocabulary();
  static Vocabulary from_words(std::span<const std::string> words);

  std::size_t id(const std::string& word) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  std::size_t size() const { return words_.size(); }
  std::size_t placeholder(std::size_t label_index) const;

  std::vector<std::size_t> encode(std::span<const std::string> words) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void push(const std::string& word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string> split_words(const std::string& text);

}  // namespace uniex
