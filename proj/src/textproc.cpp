#include "ssaqn/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ssaqn {

namespace {

bool is_quote(char c) { return c == '\'' || c == '"'; }

bool is_kept(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::isspace(static_cast<unsigned char>(c)) ||
         is_quote(c) || c == '-';
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)); }

// Expands "'ll" -> " will" etc. when the apostrophe follows a word character.
std::string expand_contractions(const std::string& s) {
  static const std::vector<std::pair<std::string, std::string>> kExpansions = {
      {"'ll", " will"}, {"'ve", " have"}, {"'re", " are"}, {"'m", " am"}};
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    bool matched = false;
    if (s[i] == '\'' && i > 0 && is_word_char(s[i - 1])) {
      for (const auto& [from, to] : kExpansions) {
        if (s.compare(i, from.size(), from) == 0 &&
            (i + from.size() == s.size() || !is_word_char(s[i + from.size()]))) {
          out += to;
          i += from.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      out += s[i];
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> preprocess(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  // lowercase + strip in one pass; stripped characters become spaces
  for (char c : text) {
    if (is_kept(c)) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      s += ' ';
    }
  }

  // split digit runs into single digits
  std::string digits;
  digits.reserve(s.size() * 2);
  for (size_t i = 0; i < s.size(); ++i) {
    bool digit = std::isdigit(static_cast<unsigned char>(s[i])) != 0;
    if (digit && i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) digits += ' ';
    digits += s[i];
  }

  // possessive: x's -> x 's
  std::string poss;
  poss.reserve(digits.size());
  for (size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] == '\'' && i > 0 && is_word_char(digits[i - 1]) && i + 1 < digits.size() &&
        digits[i + 1] == 's' && (i + 2 == digits.size() || !is_word_char(digits[i + 2]))) {
      poss += ' ';
    }
    poss += digits[i];
  }

  std::string expanded = expand_contractions(poss);

  std::vector<std::string> tokens;
  std::istringstream iss(expanded);
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

std::string preprocess_join(const std::string& text) {
  auto tokens = preprocess(text);
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  index_to_token_ = {"<pad>", "<unk>"};
  token_to_index_["<pad>"] = kPad;
  token_to_index_["<unk>"] = kUnk;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens) {
  Vocabulary v;
  std::set<std::string> unique(tokens.begin(), tokens.end());
  for (const auto& t : unique) {
    if (t.empty()) continue;
    v.token_to_index_[t] = static_cast<int>(v.index_to_token_.size());
    v.index_to_token_.push_back(t);
  }
  return v;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = token_to_index_.find(token);
  return it == token_to_index_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::tokens() const {
  return {index_to_token_.begin() + 2, index_to_token_.end()};
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (size_t i = 2; i < index_to_token_.size(); ++i) {
    out += index_to_token_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
  Vocabulary v;
  std::istringstream iss(text);
  std::string line;
  while (std::getline(iss, line)) {
    if (line.empty()) continue;
    v.token_to_index_[line] = static_cast<int>(v.index_to_token_.size());
    v.index_to_token_.push_back(line);
  }
  return v;
}

std::vector<int> encode(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.index_of(t));
  return out;
}

PaddedBatch pad_batch(const std::vector<std::vector<int>>& sequences) {
  if (sequences.empty()) throw std::invalid_argument("pad_batch: empty batch");
  size_t max_len = 0;
  for (const auto& s : sequences) max_len = std::max(max_len, s.size());
  PaddedBatch batch;
  batch.rows.reserve(sequences.size());
  for (const auto& s : sequences) {
    std::vector<int> row(max_len - s.size(), Vocabulary::kPad);
    row.insert(row.end(), s.begin(), s.end());
    batch.rows.push_back(std::move(row));
    batch.lengths.push_back(static_cast<int>(s.size()));
  }
  return batch;
}

}  // namespace ssaqn
