#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "ote/error.hpp"
#include "ote/iob.hpp"
#include "ote/rng.hpp"

using namespace ote;

namespace {

TagSequence tags_of(const std::string& s) {
  TagSequence out;
  for (char c : s) {
    if (c == ' ') continue;
    out.push_back(tag_from_char(c));
  }
  return out;
}

std::string str_of(const TagSequence& tags) {
  std::string out;
  for (Tag t : tags) out += tag_char(t);
  return out;
}

// Random sorted non-overlapping span set over n tokens.
std::vector<TokenSpan> random_spans(std::size_t n, Rng& rng) {
  std::vector<TokenSpan> spans;
  std::size_t pos = 0;
  while (pos < n) {
    if (rng.uniform() < 0.4) {
      std::size_t len = 1 + rng.index(3);
      std::size_t end = std::min(n - 1, pos + len - 1);
      spans.push_back({pos, end});
      pos = end + 1;
    } else {
      ++pos;
    }
  }
  return spans;
}

}  // namespace

TEST_CASE("the wine list example encodes as printed") {
  // "The wine list is also really nice ." with OTE "wine list"
  TagSequence tags = encode_tags(8, {{1, 2}});
  CHECK(str_of(tags) == "OIIOOOOO");
  CHECK(decode_tags(tags) == std::vector<TokenSpan>{{1, 2}});
}

TEST_CASE("adjacent phrases force a boundary B") {
  TagSequence tags = encode_tags(3, {{0, 0}, {1, 2}});
  CHECK(str_of(tags) == "IBI");
  CHECK(decode_tags(tags) == std::vector<TokenSpan>{{0, 0}, {1, 2}});
}

TEST_CASE("empty span set encodes to all O") {
  CHECK(str_of(encode_tags(4, {})) == "OOOO");
  CHECK(decode_tags(tags_of("OOOO")).empty());
}

TEST_CASE("encode validates spans") {
  CHECK_THROWS_AS(encode_tags(3, {{2, 1}}), ValidationError);
  CHECK_THROWS_AS(encode_tags(3, {{1, 3}}), ValidationError);
  CHECK_THROWS_AS(encode_tags(5, {{0, 2}, {2, 3}}), ValidationError);
  CHECK_THROWS_AS(encode_tags(5, {{3, 4}, {0, 1}}), ValidationError);
}

TEST_CASE("decode repairs ill-formed sequences") {
  CHECK(decode_tags(tags_of("BOB")) ==
        std::vector<TokenSpan>{{0, 0}, {2, 2}});
  CHECK(decode_tags(tags_of("IBI")) ==
        std::vector<TokenSpan>{{0, 0}, {1, 2}});
  CHECK(decode_tags(tags_of("OII")) == std::vector<TokenSpan>{{1, 2}});
  CHECK(decode_tags(tags_of("IIB")) ==
        std::vector<TokenSpan>{{0, 1}, {2, 2}});
  CHECK(decode_tags(tags_of("BB")) ==
        std::vector<TokenSpan>{{0, 0}, {1, 1}});
  CHECK(decode_tags({}).empty());
}

TEST_CASE("round trip on ten thousand random span sets") {
  Rng rng(20160705);
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t n = 1 + rng.index(30);
    std::vector<TokenSpan> spans = random_spans(n, rng);
    TagSequence tags = encode_tags(n, spans);
    CHECK(decode_tags(tags) == spans);
  }
}

TEST_CASE("encode emits B only at phrase-phrase boundaries") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t n = 1 + rng.index(20);
    std::vector<TokenSpan> spans = random_spans(n, rng);
    TagSequence tags = encode_tags(n, spans);
    for (std::size_t p = 0; p < n; ++p) {
      if (tags[p] != Tag::B) continue;
      bool prev_is_span_end = false;
      for (const TokenSpan& s : spans)
        if (p > 0 && s.end == p - 1) prev_is_span_end = true;
      CHECK(prev_is_span_end);
    }
  }
}

TEST_CASE("decode is total and well-formed for every sequence up to n=8") {
  for (std::size_t n = 0; n <= 8; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      TagSequence tags(n);
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i) {
        tags[i] = static_cast<Tag>(static_cast<int>(c % 3));
        c /= 3;
      }
      std::vector<TokenSpan> spans = decode_tags(tags);
      for (std::size_t i = 0; i < spans.size(); ++i) {
        CHECK(spans[i].start <= spans[i].end);
        CHECK(spans[i].end < n);
        if (i > 0) CHECK(spans[i - 1].end < spans[i].start);
      }
    }
  }
}
