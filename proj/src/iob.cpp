#include "ote/iob.hpp"

#include "ote/error.hpp"

namespace ote {

char tag_char(Tag t) {
  switch (t) {
    case Tag::I:
      return 'I';
    case Tag::O:
      return 'O';
    case Tag::B:
      return 'B';
  }
  return '?';
}

Tag tag_from_char(char c) {
  switch (c) {
    case 'I':
      return Tag::I;
    case 'O':
      return Tag::O;
    case 'B':
      return Tag::B;
    default:
      throw ValidationError(std::string("unknown IOB tag '") + c + "'");
  }
}

TagSequence encode_tags(std::size_t n, const std::vector<TokenSpan>& spans) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const TokenSpan& s = spans[i];
    if (s.start > s.end || s.end >= n) {
      throw ValidationError("span [" + std::to_string(s.start) + "," +
                            std::to_string(s.end) +
                            "] invalid for sentence of length " +
                            std::to_string(n));
    }
    if (i > 0 && spans[i - 1].end >= s.start) {
      throw ValidationError("spans must be sorted and non-overlapping");
    }
  }
  TagSequence tags(n, Tag::O);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const TokenSpan& s = spans[i];
    for (std::size_t t = s.start; t <= s.end; ++t) tags[t] = Tag::I;
    bool touches_previous =
        i > 0 && spans[i - 1].end + 1 == s.start;
    if (touches_previous) tags[s.start] = Tag::B;
  }
  return tags;
}

std::vector<TokenSpan> decode_tags(const TagSequence& tags) {
  std::vector<TokenSpan> spans;
  bool open = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Tag::I:
        if (!open) {
          open = true;
          start = i;
        }
        break;
      case Tag::B:
        if (open) spans.push_back({start, i - 1});
        open = true;
        start = i;
        break;
      case Tag::O:
        if (open) {
          spans.push_back({start, i - 1});
          open = false;
        }
        break;
    }
  }
  if (open && !tags.empty()) spans.push_back({start, tags.size() - 1});
  return spans;
}

}  // namespace ote
