#include "ote/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "ote/error.hpp"

namespace ote {

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.precision = tp + fp == 0 ? 0.0
                               : static_cast<double>(tp) /
                                     static_cast<double>(tp + fp);
  out.recall = tp + fn == 0 ? 0.0
                            : static_cast<double>(tp) /
                                  static_cast<double>(tp + fn);
  double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

PRF exact_match_prf(const std::vector<std::vector<TokenSpan>>& gold,
                    const std::vector<std::vector<TokenSpan>>& pred) {
  if (gold.size() != pred.size()) {
    throw ValidationError("exact_match_prf: " + std::to_string(gold.size()) +
                          " gold sentences vs " + std::to_string(pred.size()) +
                          " predicted");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<TokenSpan> gset(gold[i].begin(), gold[i].end());
    std::size_t hits = 0;
    for (const TokenSpan& p : pred[i]) {
      if (gset.count(p)) {
        ++hits;
      } else {
        ++fp;
      }
    }
    tp += hits;
    fn += gset.size() - hits;
  }
  return prf_from_counts(tp, fp, fn);
}

PRF exact_match_prf(const std::map<std::string, std::vector<TokenSpan>>& gold,
                    const std::map<std::string, std::vector<TokenSpan>>& pred) {
  if (gold.size() != pred.size()) {
    throw ValidationError("exact_match_prf: gold and prediction cover "
                          "different sentence ids");
  }
  std::vector<std::vector<TokenSpan>> g, p;
  auto git = gold.begin();
  auto pit = pred.begin();
  for (; git != gold.end(); ++git, ++pit) {
    if (git->first != pit->first) {
      throw ValidationError("exact_match_prf: sentence id mismatch: '" +
                            git->first + "' vs '" + pit->first + "'");
    }
    g.push_back(git->second);
    p.push_back(pit->second);
  }
  return exact_match_prf(g, p);
}

std::string SubsetSpec::name() const {
  switch (kind) {
    case SubsetKind::kAll:
      return "all";
    case SubsetKind::kNoOov:
      return "no_oov";
    case SubsetKind::kOovSentence:
      return "oov_sentence";
    case SubsetKind::kOovOpinion:
      return "oov_opinion";
    case SubsetKind::kMultiword:
      return "multiword_" + std::to_string(k);
  }
  return "?";
}

std::vector<SubsetSpec> default_subsets() {
  return {
      {SubsetKind::kAll, 0},         {SubsetKind::kNoOov, 0},
      {SubsetKind::kOovSentence, 0}, {SubsetKind::kOovOpinion, 0},
      {SubsetKind::kMultiword, 2},   {SubsetKind::kMultiword, 3},
      {SubsetKind::kMultiword, 4},
  };
}

std::vector<std::size_t> subset_filter(const Corpus& corpus, const Vocab& words,
                                       const SubsetSpec& spec) {
  if (spec.kind == SubsetKind::kMultiword && spec.k < 2)
    throw ValidationError("multiword subset needs k >= 2");
  auto unknown = [&](const Token& t) {
    return !words.contains(lowercase(t.text));
  };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const Sentence& s = corpus.sentences[i];
    bool keep = false;
    switch (spec.kind) {
      case SubsetKind::kAll:
        keep = true;
        break;
      case SubsetKind::kNoOov:
        keep = std::none_of(s.tokens.begin(), s.tokens.end(), unknown);
        break;
      case SubsetKind::kOovSentence:
        keep = std::any_of(s.tokens.begin(), s.tokens.end(), unknown);
        break;
      case SubsetKind::kOovOpinion:
        for (const TokenSpan& sp : s.gold) {
          for (std::size_t t = sp.start; t <= sp.end && !keep; ++t)
            keep = unknown(s.tokens[t]);
          if (keep) break;
        }
        break;
      case SubsetKind::kMultiword:
        for (const TokenSpan& sp : s.gold) {
          if (sp.length() >= spec.k) {
            keep = true;
            break;
          }
        }
        break;
    }
    if (keep) out.push_back(i);
  }
  return out;
}

std::vector<SubsetScore> evaluate(const ModelParams<float>& m,
                                  const Corpus& corpus, const Vocab& words,
                                  const Vocab& chars,
                                  const std::vector<SubsetSpec>& specs) {
  std::vector<std::vector<TokenSpan>> pred(corpus.sentences.size());
  std::vector<std::vector<TokenSpan>> gold(corpus.sentences.size());
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const Sentence& s = corpus.sentences[i];
    gold[i] = s.gold;
    if (s.tokens.empty()) continue;  // nothing to tag
    EncodedSentence enc = encode_sentence(s, words, chars);
    pred[i] = decode_tags(predict_tags(m, enc));
  }
  std::vector<SubsetScore> out;
  for (const SubsetSpec& spec : specs) {
    std::vector<std::size_t> idx = subset_filter(corpus, words, spec);
    std::vector<std::vector<TokenSpan>> g, p;
    g.reserve(idx.size());
    p.reserve(idx.size());
    for (std::size_t i : idx) {
      g.push_back(gold[i]);
      p.push_back(pred[i]);
    }
    SubsetScore score;
    score.spec = spec;
    score.sentences = idx.size();
    score.prf = exact_match_prf(g, p);
    out.push_back(std::move(score));
  }
  return out;
}

std::vector<std::pair<std::string, double>> nearest_neighbors(
    const std::vector<std::pair<std::string, std::vector<float>>>& embeddings,
    const std::string& query, std::size_t k) {
  if (k == 0) throw ValidationError("nearest_neighbors needs k >= 1");
  const std::vector<float>* qv = nullptr;
  for (const auto& [token, vec] : embeddings) {
    if (token == query) {
      qv = &vec;
      break;
    }
  }
  if (!qv) throw LookupError("unknown query token '" + query + "'");
  auto norm = [](const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
  };
  double qn = norm(*qv);
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& [token, vec] : embeddings) {
    if (token == query) continue;
    double dot = 0.0;
    for (std::size_t i = 0; i < vec.size() && i < qv->size(); ++i)
      dot += static_cast<double>(vec[i]) * (*qv)[i];
    double vn = norm(vec);
    double cos = qn > 0.0 && vn > 0.0 ? dot / (qn * vn) : 0.0;
    scored.emplace_back(token, cos);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

std::vector<std::pair<std::string, std::string>> suffix_groups(
    const std::vector<std::string>& ranked_tokens,
    const std::vector<std::string>& suffixes) {
  if (suffixes.empty()) throw ValidationError("suffix list must be nonempty");
  std::size_t limit = std::min<std::size_t>(ranked_tokens.size(), 2000);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < limit; ++i) {
    const std::string& word = ranked_tokens[i];
    const std::string* best = nullptr;
    std::size_t best_len = 0;
    for (const std::string& label : suffixes) {
      std::string_view suffix = label;
      if (!suffix.empty() && suffix.front() == '-') suffix.remove_prefix(1);
      if (suffix.empty() || suffix.size() > word.size()) continue;
      if (word.compare(word.size() - suffix.size(), suffix.size(),
                       suffix.data(), suffix.size()) != 0)
        continue;
      if (suffix.size() > best_len) {
        best_len = suffix.size();
        best = &label;
      }
    }
    if (best) out.emplace_back(word, *best);
  }
  return out;
}

namespace {

void write_float(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  out << buf;
}

}  // namespace

void export_embeddings(std::ostream& out, const ModelParams<float>& m,
                       const Vocab& words, const Vocab& chars,
                       const std::vector<std::string>& tokens,
                       EmbeddingSource source,
                       const std::map<std::string, std::string>* labels) {
  std::size_t dim = source == EmbeddingSource::kWord
                        ? m.word_table.dim()
                        : (m.char_encoder ? m.char_encoder->table.dim() : 0);
  if (source == EmbeddingSource::kCharWord && !m.char_encoder) {
    throw CapabilityError(
        "char-word embeddings requested from a word-only model");
  }
  out << "token";
  if (labels) out << "\tlabel";
  for (std::size_t i = 0; i < dim; ++i) out << "\td" << i;
  out << "\n";
  for (const std::string& token : tokens) {
    out << token;
    if (labels) {
      auto it = labels->find(token);
      out << '\t' << (it == labels->end() ? "" : it->second);
    }
    if (source == EmbeddingSource::kWord) {
      std::size_t col = words.lookup(lowercase(token));
      for (std::size_t r = 0; r < dim; ++r) {
        out << '\t';
        write_float(out, m.word_table.matrix.at(r, col));
      }
    } else {
      Graph<float> g;
      CharEncoderNodes nodes;
      nodes.table = g.constant(m.char_encoder->table.matrix);
      nodes.bigru.fwd = bind_gru(g, m.char_encoder->bigru.fwd, "chr.fwd");
      nodes.bigru.bwd = bind_gru(g, m.char_encoder->bigru.bwd, "chr.bwd");
      nodes.Wcw = g.constant(m.char_encoder->Wcw);
      nodes.bcw = g.constant(m.char_encoder->bcw);
      std::vector<std::size_t> ids;
      ids.reserve(token.size());
      for (char c : token) ids.push_back(chars.lookup(std::string(1, c)));
      NodeId vec = char_word_embed(g, nodes, ids);
      for (std::size_t r = 0; r < dim; ++r) {
        out << '\t';
        write_float(out, g.value(vec)[r]);
      }
    }
    out << "\n";
  }
}

std::vector<std::array<double, 2>> pca_project(
    const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  if (n < 2) throw ValidationError("pca_project needs at least 2 points");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d)
      throw ValidationError("pca_project rows must share one dimension");
  }

  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (double& v : mean) v /= static_cast<double>(n);

  std::vector<std::vector<double>> centered(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[i][j] = rows[i][j] - mean[j];

  // covariance (d x d)
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      double va = centered[i][a];
      if (va == 0.0) continue;
      for (std::size_t b = 0; b < d; ++b) cov[a][b] += va * centered[i][b];
    }
  double total_var = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b)
      cov[a][b] /= static_cast<double>(n - 1);
    total_var += cov[a][a];
  }
  if (total_var == 0.0)
    throw ValidationError("pca_project: data has zero variance");

  constexpr double kTol = 1e-9;
  constexpr int kMaxIter = 1000;

  auto power_direction = [&](std::vector<std::vector<double>>& c) {
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j)
      v[j] = 1.0 + 1e-4 * static_cast<double>(j);  // deterministic start
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    for (double& x : v) x /= vn;
    std::vector<double> next(d);
    for (int it = 0; it < kMaxIter; ++it) {
      for (std::size_t a = 0; a < d; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < d; ++b) acc += c[a][b] * v[b];
        next[a] = acc;
      }
      double nn = 0.0;
      for (double x : next) nn += x * x;
      nn = std::sqrt(nn);
      if (nn < 1e-300) break;  // deflated to (numerically) zero matrix
      double delta = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        next[j] /= nn;
        delta = std::max(delta, std::abs(next[j] - v[j]));
      }
      v = next;
      if (delta < kTol) break;
    }
    // eigenvalue estimate and sign convention
    double lambda = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < d; ++b) acc += c[a][b] * v[b];
      lambda += v[a] * acc;
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (std::abs(v[j]) > 1e-12) {
        if (v[j] < 0.0)
          for (double& x : v) x = -x;
        break;
      }
    }
    return std::make_pair(v, lambda);
  };

  auto [v1, l1] = power_direction(cov);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) cov[a][b] -= l1 * v1[a] * v1[b];
  auto [v2, l2] = power_direction(cov);
  (void)l2;

  std::vector<std::array<double, 2>> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x += centered[i][j] * v1[j];
      y += centered[i][j] * v2[j];
    }
    coords[i] = {x, y};
  }
  return coords;
}

}  // namespace ote
