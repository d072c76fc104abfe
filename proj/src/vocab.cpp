#include "cot3d/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "cot3d/errors.hpp"

namespace cot3d {
namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kThinkOpen.size(), kThinkOpen) == 0) {
      flush();
      out.emplace_back(kThinkOpen);
      i += kThinkOpen.size();
      continue;
    }
    if (text.compare(i, kThinkClose.size(), kThinkClose) == 0) {
      flush();
      out.emplace_back(kThinkClose);
      i += kThinkClose.size();
      continue;
    }
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
    }
    ++i;
  }
  flush();
  return out;
}

Vocab::Vocab() : id_to_token_{"<pad>", "<unk>"} {}

void Vocab::add(const std::string& token) {
  if (token_to_id_.contains(token)) throw DataError("duplicate vocabulary token '" + token + "'");
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::string>& corpus, std::size_t min_freq) {
  if (corpus.empty()) throw DataError("build_vocab: corpus is empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= min_freq) ranked.emplace_back(w, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [w, c] : ranked) v.add(w);
  return v;
}

Vocab Vocab::from_lines(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("vocabulary contains an empty token");
    v.add(t);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens()) out << t << '\n';
}

std::vector<std::string> Vocab::tokens() const {
  return {id_to_token_.begin() + 2, id_to_token_.end()};
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 1) throw RangeError("tokenize: max_len must be at least 1");
  std::vector<int> ids(max_len, Vocab::kPad);
  auto words = split_words(text);
  const std::size_t n = std::min(words.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(words[i]);
  return ids;
}

}  // namespace cot3d
