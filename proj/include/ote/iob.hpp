#ifndef OTE_IOB_HPP
#define OTE_IOB_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace ote {

// Tag codes are stable: they double as class indices of the tag
// projection layer.
enum class Tag : int { I = 0, O = 1, B = 2 };

using TagSequence = std::vector<Tag>;

// Inclusive token range of one opinion target expression.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

char tag_char(Tag t);
Tag tag_from_char(char c);

// Lossless IOB-1 encoding: span tokens are I, except the first token of a
// span that starts right after another span ends, which becomes B.
// Spans must be sorted, non-overlapping and inside [0, n).
TagSequence encode_tags(std::size_t n, const std::vector<TokenSpan>& spans);

// Total inverse: accepts any tag sequence, including ill-formed model
// output. Runs of I open spans, B closes the current span and opens a new
// one (an orphan B simply opens), O closes. Output is sorted and
// non-overlapping by construction.
std::vector<TokenSpan> decode_tags(const TagSequence& tags);

}  // namespace ote

#endif  // OTE_IOB_HPP
