#ifndef OTE_ENCODING_HPP
#define OTE_ENCODING_HPP

#include <cstddef>
#include <vector>

#include "ote/iob.hpp"

namespace ote {

// A sentence mapped to vocabulary ids: the model's input record. Word ids
// come from the lowercased word vocabulary, char ids from the raw token
// text. gold is empty for unlabeled input.
struct EncodedSentence {
  std::vector<std::size_t> word_ids;
  std::vector<std::vector<std::size_t>> char_ids;
  TagSequence gold;

  std::size_t length() const { return word_ids.size(); }
};

}  // namespace ote

#endif  // OTE_ENCODING_HPP
