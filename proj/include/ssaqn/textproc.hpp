#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ssaqn {

// Tokenisation pipeline: lowercase, strip everything but alphanumerics,
// whitespace, quotes and hyphens, split digit runs into single digits,
// separate possessive 's, expand 'll / 've / 're / 'm, then split on
// whitespace.
std::vector<std::string> preprocess(const std::string& text);

// Convenience: preprocess and re-join with single spaces. Used as a
// canonical key for caches and history ledgers.
std::string preprocess_join(const std::string& text);

// Token <-> index map with reserved indices PAD=0 and UNK=1.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  // Tokens are deduplicated and assigned indices 2.. in lexicographic order.
  static Vocabulary build(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(index_to_token_.size()); }
  int index_of(const std::string& token) const;  // kUnk when unknown
  const std::string& token_at(int index) const { return index_to_token_.at(index); }

  // Tokens with indices >= 2, in index order.
  std::vector<std::string> tokens() const;

  // One token per line, UTF-8; PAD/UNK implicit, indices implicit by position.
  std::string serialize() const;
  static Vocabulary deserialize(const std::string& text);

  bool operator==(const Vocabulary& other) const {
    return index_to_token_ == other.index_to_token_;
  }

 private:
  std::unordered_map<std::string, int> token_to_index_;
  std::vector<std::string> index_to_token_;
};

// Known tokens map to their index, unknown ones to UNK.
std::vector<int> encode(const Vocabulary& vocab, const std::vector<std::string>& tokens);

struct PaddedBatch {
  std::vector<std::vector<int>> rows;  // every row left-padded with 0
  std::vector<int> lengths;            // original lengths
};

// Left-pads every sequence with PAD (0) to the batch maximum length.
// Throws std::invalid_argument on an empty batch.
PaddedBatch pad_batch(const std::vector<std::vector<int>>& sequences);

}  // namespace ssaqn
