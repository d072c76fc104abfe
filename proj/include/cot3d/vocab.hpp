#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cot3d {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

// Lowercases and splits on whitespace and punctuation; punctuation is
// dropped. The reasoning markers <think> and </think> survive as single
// tokens. Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> split_words(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  // Tokens with frequency >= min_freq, ordered by descending frequency and
  // then lexicographically.
  static Vocab build(const std::vector<std::string>& corpus, std::size_t min_freq = 1);

  // One token per line; line i holds id i + 2.
  static Vocab from_lines(const std::vector<std::string>& tokens);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::vector<std::string> tokens() const;  // non-reserved, in id order

  int id(const std::string& token) const;
  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return id_to_token_.size(); }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void add(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Truncates to max_len and pads with Vocab::kPad; unknown words map to kUnk.
std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);

inline Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq = 1) {
  return Vocab::build(corpus, min_freq);
}

}  // namespace cot3d
