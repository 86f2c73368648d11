#ifndef OTE_EVALUATION_HPP
#define OTE_EVALUATION_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ote/data.hpp"
#include "ote/iob.hpp"
#include "ote/layers.hpp"

namespace ote {

// Micro-averaged exact-match scores: a predicted span counts iff the same
// (start, end) pair is gold in the same sentence.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

// Aligned per-sentence span sets. Sizes must match.
PRF exact_match_prf(const std::vector<std::vector<TokenSpan>>& gold,
                    const std::vector<std::vector<TokenSpan>>& pred);

// Id-keyed variant; key sets must be identical.
PRF exact_match_prf(const std::map<std::string, std::vector<TokenSpan>>& gold,
                    const std::map<std::string, std::vector<TokenSpan>>& pred);

enum class SubsetKind {
  kAll,
  kNoOov,        // every word known to the vocabulary
  kOovSentence,  // at least one unknown word anywhere
  kOovOpinion,   // at least one gold span containing an unknown word
  kMultiword,    // at least one gold span of >= k tokens
};

struct SubsetSpec {
  SubsetKind kind = SubsetKind::kAll;
  std::size_t k = 2;  // multiword threshold

  std::string name() const;
};

// The seven subsets reported by cmd_eval.
std::vector<SubsetSpec> default_subsets();

// Indices of the sentences that belong to the subset. Unknown means the
// lowercased token is absent from the word vocabulary.
std::vector<std::size_t> subset_filter(const Corpus& corpus, const Vocab& words,
                                       const SubsetSpec& spec);

struct SubsetScore {
  SubsetSpec spec;
  PRF prf;
  std::size_t sentences = 0;
};

// Tags every sentence once, decodes spans, scores each subset.
std::vector<SubsetScore> evaluate(const ModelParams<float>& m,
                                  const Corpus& corpus, const Vocab& words,
                                  const Vocab& chars,
                                  const std::vector<SubsetSpec>& specs);

// Top-k neighbors by cosine similarity, query excluded, ties broken by
// token order.
std::vector<std::pair<std::string, double>> nearest_neighbors(
    const std::vector<std::pair<std::string, std::vector<float>>>& embeddings,
    const std::string& query, std::size_t k);

inline const std::vector<std::string>& default_suffixes() {
  static const std::vector<std::string> kSuffixes = {"-ing",  "-ly",  "-able",
                                                     "-ish",  "-less", "-ize"};
  return kSuffixes;
}

// Scans the first 2000 entries of a frequency-ranked word list and labels
// each word with the longest suffix it ends on; words matching none are
// excluded. Suffixes may carry a leading '-' which is ignored for
// matching but kept in the label.
std::vector<std::pair<std::string, std::string>> suffix_groups(
    const std::vector<std::string>& ranked_tokens,
    const std::vector<std::string>& suffixes = default_suffixes());

enum class EmbeddingSource { kWord, kCharWord };

// One row per token: token, optional label, embedding values. Word
// vectors come from the word table (UNK column for unknown words),
// char-word vectors from running the character encoder on the token.
void export_embeddings(
    std::ostream& out, const ModelParams<float>& m, const Vocab& words,
    const Vocab& chars, const std::vector<std::string>& tokens,
    EmbeddingSource source,
    const std::map<std::string, std::string>* labels = nullptr);

// Mean-centered projection onto the top two principal directions (power
// iteration with deflation). The sign of each direction is fixed so its
// first nonzero coordinate is positive.
std::vector<std::array<double, 2>> pca_project(
    const std::vector<std::vector<double>>& rows);

}  // namespace ote

#endif  // OTE_EVALUATION_HPP
