#ifndef OTE_DATA_HPP
#define OTE_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ote/encoding.hpp"
#include "ote/iob.hpp"
#include "ote/rng.hpp"
#include "ote/tensor.hpp"

namespace ote {

// One token with exact character offsets into the sentence text
// (end exclusive).
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Character-offset annotation span, end exclusive.
struct CharSpan {
  std::size_t from = 0;
  std::size_t to = 0;

  friend bool operator==(const CharSpan&, const CharSpan&) = default;
  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

struct Sentence {
  std::string id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<TokenSpan> gold;  // sorted, non-overlapping
};

// Counters for the repairs ingestion may apply.
struct IngestStats {
  std::size_t duplicate_opinions = 0;
  std::size_t dropped_unaligned = 0;
  std::size_t merged_overlaps = 0;
};

struct Corpus {
  std::vector<Sentence> sentences;
  IngestStats stats;

  std::size_t total_spans() const {
    std::size_t n = 0;
    for (const Sentence& s : sentences) n += s.gold.size();
    return n;
  }
};

enum class VocabKind { kWord, kChar };

// Symbol-to-index map with PAD=0 and UNK=1 reserved. Word vocabularies
// hold lowercased tokens, char vocabularies single-byte symbols from the
// raw token text.
class Vocab {
public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kReserved = 2;

  Vocab() = default;
  explicit Vocab(VocabKind kind) : kind_(kind) {}

  // symbols are the non-reserved entries, already in index order.
  static Vocab from_symbols(VocabKind kind, std::vector<std::string> symbols);

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return symbols_.size() + kReserved; }

  std::size_t lookup(const std::string& symbol) const {
    auto it = index_.find(symbol);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& symbol) const {
    return index_.count(symbol) != 0;
  }

  // Non-reserved symbols in index order (index = position + kReserved).
  const std::vector<std::string>& symbols() const { return symbols_; }

private:
  VocabKind kind_ = VocabKind::kWord;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string lowercase(std::string_view s);

// Whitespace split followed by peeling leading/trailing punctuation into
// single-character tokens. Internal punctuation (hyphens, apostrophes)
// stays inside the token. Offsets are exact; tokens are never empty.
std::vector<Token> tokenize(std::string_view text);

// Token span covering every token that overlaps the character span.
// Spans aligning to zero tokens are dropped (counted in stats), exact
// duplicates collapse, and overlapping results merge to their union.
std::vector<TokenSpan> align_spans(const std::vector<Token>& tokens,
                                   const std::vector<CharSpan>& spans,
                                   IngestStats* stats = nullptr);

// SemEval ABSA 2016 subset: Reviews/Review/sentences/sentence with text
// and Opinion elements carrying target/from/to. NULL targets are skipped;
// duplicate (from,to) pairs are collapsed.
Corpus parse_semeval_xml(const std::string& path);

// CoNLL-style input: "token<TAB>tag" lines, blank line between sentences,
// tags in {I,O,B}. Sentence text is reconstructed with single spaces.
Corpus read_conll(const std::string& path);

// Plain text, one sentence per line, ids s0, s1, ...
Corpus read_plain(const std::string& path);

// Most frequent symbols first (ties lexicographic), then truncated to
// max_size and prefixed by PAD/UNK.
Vocab build_vocab(const Corpus& corpus, VocabKind kind, std::size_t max_size);

// Frequency-ranked lowercased word list of a corpus (most frequent first,
// ties lexicographic) for the analysis tooling.
std::vector<std::string> ranked_words(const Corpus& corpus);

struct LoadedEmbeddings {
  Tensor<float> matrix;  // (dim x vocab_size)
  double coverage = 0.0; // found non-reserved entries / non-reserved size
  std::size_t duplicates = 0;
};

// Text embedding file: optional "count dim" header line, then one token
// and dim reals per line. Vocab entries absent from the file keep their
// random initialization; the first occurrence of a duplicated token wins.
LoadedEmbeddings load_embeddings(const std::string& path, const Vocab& vocab,
                                 std::size_t dim, Rng& rng);

// Raw token->vector map of an embedding file, for the analysis commands.
std::vector<std::pair<std::string, std::vector<float>>> read_embedding_entries(
    const std::string& path);

EncodedSentence encode_sentence(const Sentence& s, const Vocab& words,
                                const Vocab& chars);

// Index groups for one epoch: a seeded permutation (distinct per epoch)
// cut into consecutive groups of at most batch_size.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch);

}  // namespace ote

#endif  // OTE_DATA_HPP
