#ifndef OTE_LAYERS_HPP
#define OTE_LAYERS_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ote/encoding.hpp"
#include "ote/error.hpp"
#include "ote/graph.hpp"
#include "ote/iob.hpp"
#include "ote/rng.hpp"
#include "ote/tensor.hpp"

namespace ote {

enum class Variant { kWordOnly, kCharWord };

inline std::string variant_name(Variant v) {
  return v == Variant::kWordOnly ? "word-only" : "char+word";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "word-only") return Variant::kWordOnly;
  if (s == "char+word") return Variant::kCharWord;
  throw ValidationError("unknown variant '" + s +
                        "' (expected word-only or char+word)");
}

struct ModelConfig {
  Variant variant = Variant::kCharWord;
  std::size_t word_vocab = 0;  // table columns, reserved ids included
  std::size_t char_vocab = 0;
  std::size_t word_dim = 100;  // d_wrd
  std::size_t hidden = 100;    // r_wrd; split evenly across directions
  std::size_t char_dim = 50;   // d_chr
  double dropout_input = 0.5;  // on the concatenated input embeddings
  double dropout_output = 0.5; // on the BiGRU output states
  std::uint64_t seed = 1;

  bool has_chars() const { return variant == Variant::kCharWord; }

  std::size_t input_dim() const {
    return has_chars() ? word_dim + char_dim : word_dim;
  }

  void validate() const {
    if (hidden == 0 || hidden % 2 != 0)
      throw ValidationError("hidden size must be even and positive, got " +
                            std::to_string(hidden));
    if (word_vocab < 2)
      throw ValidationError("word vocabulary must include PAD and UNK");
    if (word_dim == 0) throw ValidationError("word dimension must be > 0");
    if (has_chars()) {
      if (char_vocab < 2)
        throw ValidationError("char vocabulary must include PAD and UNK");
      if (char_dim == 0) throw ValidationError("char dimension must be > 0");
    }
    for (double r : {dropout_input, dropout_output}) {
      if (r < 0.0 || r >= 1.0)
        throw ValidationError("dropout rate must be in [0,1), got " +
                              std::to_string(r));
    }
  }
};

template <typename S>
struct EmbeddingTable {
  Tensor<S> matrix;  // (dim x vocab_size)
  bool trainable = true;

  std::size_t dim() const { return matrix.rows(); }
  std::size_t vocab_size() const { return matrix.cols(); }
};

// Gate and candidate weights of one GRU direction.
template <typename S>
struct GruParams {
  Tensor<S> Wz, Uz, bz;
  Tensor<S> Wr, Ur, br;
  Tensor<S> Wh, Uh, bh;

  std::size_t hidden() const { return Wz.rows(); }
  std::size_t input() const { return Wz.cols(); }
};

template <typename S>
struct BiGruParams {
  GruParams<S> fwd;
  GruParams<S> bwd;
};

template <typename S>
struct CharWordEncoderParams {
  EmbeddingTable<S> table;   // (char_dim x char_vocab)
  BiGruParams<S> bigru;      // hidden char_dim per direction
  Tensor<S> Wcw;             // (char_dim x 2*char_dim)
  Tensor<S> bcw;             // (char_dim)
};

template <typename S>
struct TagProjectionParams {
  Tensor<S> W;  // (3 x hidden)
  Tensor<S> b;  // (3)
};

template <typename S>
struct ModelParams {
  ModelConfig config;
  EmbeddingTable<S> word_table;
  BiGruParams<S> sentence_bigru;
  TagProjectionParams<S> tag_proj;
  std::optional<CharWordEncoderParams<S>> char_encoder;

  // Enumerates every trainable tensor with its canonical name, in a fixed
  // order shared by initialization, the optimizer and serialization.
  template <typename F>
  void for_each_param(F&& f) {
    visit_params(*this, f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    auto shim = [&](const std::string& name, Tensor<S>& t) {
      f(name, static_cast<const Tensor<S>&>(t));
    };
    visit_params(const_cast<ModelParams&>(*this), shim);
  }

private:
  template <typename M, typename F>
  static void visit_gru(M& gru, const std::string& prefix, F& f) {
    f(prefix + ".Wz", gru.Wz);
    f(prefix + ".Uz", gru.Uz);
    f(prefix + ".bz", gru.bz);
    f(prefix + ".Wr", gru.Wr);
    f(prefix + ".Ur", gru.Ur);
    f(prefix + ".br", gru.br);
    f(prefix + ".Wh", gru.Wh);
    f(prefix + ".Uh", gru.Uh);
    f(prefix + ".bh", gru.bh);
  }

  template <typename F>
  static void visit_params(ModelParams& m, F& f) {
    f("wrd.table", m.word_table.matrix);
    visit_gru(m.sentence_bigru.fwd, "snt.fwd", f);
    visit_gru(m.sentence_bigru.bwd, "snt.bwd", f);
    f("tag.W", m.tag_proj.W);
    f("tag.b", m.tag_proj.b);
    if (m.char_encoder) {
      f("chr.table", m.char_encoder->table.matrix);
      visit_gru(m.char_encoder->bigru.fwd, "chr.fwd", f);
      visit_gru(m.char_encoder->bigru.bwd, "chr.bwd", f);
      f("chr.Wcw", m.char_encoder->Wcw);
      f("chr.bcw", m.char_encoder->bcw);
    }
  }
};

// ---------------------------------------------------------------------------
// Initialization. Recurrent and projection weights are uniform(-0.08, 0.08),
// biases zero, embedding tables uniform(-0.5/d, 0.5/d).
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

template <typename S>
EmbeddingTable<S> init_embedding_table(std::size_t dim, std::size_t vocab,
                                       Rng& rng) {
  double bound = 0.5 / static_cast<double>(dim);
  return EmbeddingTable<S>{
      uniform_tensor<S>(Shape{dim, vocab}, -bound, bound, rng), true};
}

template <typename S>
GruParams<S> init_gru(std::size_t hidden, std::size_t input, Rng& rng) {
  constexpr double kBound = 0.08;
  auto weight = [&](std::size_t r, std::size_t c) {
    return uniform_tensor<S>(Shape{r, c}, -kBound, kBound, rng);
  };
  GruParams<S> p;
  p.Wz = weight(hidden, input);
  p.Uz = weight(hidden, hidden);
  p.bz = Tensor<S>::zeros(Shape{hidden});
  p.Wr = weight(hidden, input);
  p.Ur = weight(hidden, hidden);
  p.br = Tensor<S>::zeros(Shape{hidden});
  p.Wh = weight(hidden, input);
  p.Uh = weight(hidden, hidden);
  p.bh = Tensor<S>::zeros(Shape{hidden});
  return p;
}

template <typename S>
ModelParams<S> init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  constexpr double kBound = 0.08;
  ModelParams<S> m;
  m.config = cfg;
  m.word_table = init_embedding_table<S>(cfg.word_dim, cfg.word_vocab, rng);
  std::size_t half = cfg.hidden / 2;
  m.sentence_bigru.fwd = init_gru<S>(half, cfg.input_dim(), rng);
  m.sentence_bigru.bwd = init_gru<S>(half, cfg.input_dim(), rng);
  m.tag_proj.W = uniform_tensor<S>(Shape{3, cfg.hidden}, -kBound, kBound, rng);
  m.tag_proj.b = Tensor<S>::zeros(Shape{3});
  if (cfg.has_chars()) {
    CharWordEncoderParams<S> ce;
    ce.table = init_embedding_table<S>(cfg.char_dim, cfg.char_vocab, rng);
    ce.bigru.fwd = init_gru<S>(cfg.char_dim, cfg.char_dim, rng);
    ce.bigru.bwd = init_gru<S>(cfg.char_dim, cfg.char_dim, rng);
    ce.Wcw = uniform_tensor<S>(Shape{cfg.char_dim, 2 * cfg.char_dim}, -kBound,
                               kBound, rng);
    ce.bcw = Tensor<S>::zeros(Shape{cfg.char_dim});
    m.char_encoder = std::move(ce);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Graph bindings: parameters become named graph leaves once per graph.
// ---------------------------------------------------------------------------

struct GruNodes {
  NodeId Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;
};

struct BiGruNodes {
  GruNodes fwd;
  GruNodes bwd;
};

struct CharEncoderNodes {
  NodeId table;
  BiGruNodes bigru;
  NodeId Wcw, bcw;
};

struct ModelNodes {
  NodeId word_table;
  BiGruNodes sentence;
  NodeId Wtag, btag;
  std::optional<CharEncoderNodes> chars;
};

template <typename S>
GruNodes bind_gru(Graph<S>& g, const GruParams<S>& p,
                  const std::string& prefix) {
  GruNodes n;
  n.Wz = g.parameter(prefix + ".Wz", p.Wz);
  n.Uz = g.parameter(prefix + ".Uz", p.Uz);
  n.bz = g.parameter(prefix + ".bz", p.bz);
  n.Wr = g.parameter(prefix + ".Wr", p.Wr);
  n.Ur = g.parameter(prefix + ".Ur", p.Ur);
  n.br = g.parameter(prefix + ".br", p.br);
  n.Wh = g.parameter(prefix + ".Wh", p.Wh);
  n.Uh = g.parameter(prefix + ".Uh", p.Uh);
  n.bh = g.parameter(prefix + ".bh", p.bh);
  return n;
}

template <typename S>
NodeId bind_table(Graph<S>& g, const EmbeddingTable<S>& t,
                  const std::string& name) {
  return t.trainable ? g.parameter(name, t.matrix) : g.constant(t.matrix);
}

template <typename S>
ModelNodes bind_model(Graph<S>& g, const ModelParams<S>& m) {
  ModelNodes n;
  n.word_table = bind_table(g, m.word_table, "wrd.table");
  n.sentence.fwd = bind_gru(g, m.sentence_bigru.fwd, "snt.fwd");
  n.sentence.bwd = bind_gru(g, m.sentence_bigru.bwd, "snt.bwd");
  n.Wtag = g.parameter("tag.W", m.tag_proj.W);
  n.btag = g.parameter("tag.b", m.tag_proj.b);
  if (m.char_encoder) {
    CharEncoderNodes ce;
    ce.table = bind_table(g, m.char_encoder->table, "chr.table");
    ce.bigru.fwd = bind_gru(g, m.char_encoder->bigru.fwd, "chr.fwd");
    ce.bigru.bwd = bind_gru(g, m.char_encoder->bigru.bwd, "chr.bwd");
    ce.Wcw = g.parameter("chr.Wcw", m.char_encoder->Wcw);
    ce.bcw = g.parameter("chr.bcw", m.char_encoder->bcw);
    n.chars = ce;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Forward computations.
// ---------------------------------------------------------------------------

template <typename S>
std::vector<NodeId> embed_lookup(Graph<S>& g, NodeId table,
                                 const std::vector<std::size_t>& ids) {
  std::vector<NodeId> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(g.lookup_column(table, id));
  return out;
}

// One GRU timestep, gates and candidate exactly as the cell defines them:
// the update gate weighs the candidate, (1 - z) keeps the previous state,
// and the candidate nonlinearity is the ELU.
template <typename S>
NodeId gru_step(Graph<S>& g, const GruNodes& p, NodeId x, NodeId h_prev) {
  NodeId z = g.sigmoid(
      g.add(g.add(g.matmul(p.Wz, x), g.matmul(p.Uz, h_prev)), p.bz));
  NodeId r = g.sigmoid(
      g.add(g.add(g.matmul(p.Wr, x), g.matmul(p.Ur, h_prev)), p.br));
  NodeId cand = g.elu(g.add(
      g.add(g.matmul(p.Wh, x), g.matmul(p.Uh, g.hadamard(r, h_prev))), p.bh));
  NodeId keep = g.add_scalar(g.scale(z, S(-1)), S(1));  // 1 - z
  return g.add(g.hadamard(keep, h_prev), g.hadamard(z, cand));
}

template <typename S>
std::vector<NodeId> gru_sequence(Graph<S>& g, const GruNodes& p,
                                 const std::vector<NodeId>& xs, NodeId h0) {
  if (xs.empty()) throw ContractError("gru_sequence needs a nonempty input");
  std::vector<NodeId> hs;
  hs.reserve(xs.size());
  NodeId h = h0;
  for (NodeId x : xs) {
    h = gru_step(g, p, x, h);
    hs.push_back(h);
  }
  return hs;
}

template <typename S>
NodeId zero_state(Graph<S>& g, std::size_t hidden) {
  return g.constant(Tensor<S>::zeros(Shape{hidden}));
}

// Bidirectional GRU: the backward direction consumes the reversed input
// and its outputs are re-reversed, then both states are concatenated per
// timestep.
template <typename S>
std::vector<NodeId> bigru(Graph<S>& g, const BiGruNodes& p,
                          const std::vector<NodeId>& xs) {
  if (xs.empty()) throw ContractError("bigru needs a nonempty input");
  std::size_t fwd_hidden = g.value(p.fwd.Uz).rows();
  std::size_t bwd_hidden = g.value(p.bwd.Uz).rows();
  std::vector<NodeId> fwd =
      gru_sequence(g, p.fwd, xs, zero_state(g, fwd_hidden));
  std::vector<NodeId> rev(xs.rbegin(), xs.rend());
  std::vector<NodeId> bwd_run =
      gru_sequence(g, p.bwd, rev, zero_state(g, bwd_hidden));
  std::vector<NodeId> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    NodeId bwd_i = bwd_run[xs.size() - 1 - i];
    out.push_back(g.concat({fwd[i], bwd_i}));
  }
  return out;
}

// Character-level word embedding: char BiGRU over the embedded character
// sequence, final forward state (last char) concatenated with final
// backward state (first char), then a linear layer down to char_dim.
template <typename S>
NodeId char_word_embed(Graph<S>& g, const CharEncoderNodes& p,
                       const std::vector<std::size_t>& chars) {
  if (chars.empty())
    throw ContractError("char_word_embed needs at least one character");
  std::vector<NodeId> xs = embed_lookup(g, p.table, chars);
  std::size_t hidden = g.value(p.bigru.fwd.Uz).rows();
  std::vector<NodeId> fwd =
      gru_sequence(g, p.bigru.fwd, xs, zero_state(g, hidden));
  std::vector<NodeId> rev(xs.rbegin(), xs.rend());
  std::vector<NodeId> bwd =
      gru_sequence(g, p.bigru.bwd, rev, zero_state(g, hidden));
  NodeId final_state = g.concat({fwd.back(), bwd.back()});
  return g.add(g.matmul(p.Wcw, final_state), p.bcw);
}

enum class Mode { kTrain, kInfer };

// Inverted dropout: zero with probability rate, otherwise 1/(1-rate), so
// inference needs no rescaling. rate 0 gives the identity mask.
template <typename S>
Tensor<S> dropout_mask(const Shape& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ValidationError("dropout rate must be in [0,1), got " +
                          std::to_string(rate));
  Tensor<S> mask = Tensor<S>::full(shape, S(1));
  if (rate == 0.0) return mask;
  S kept = static_cast<S>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.bernoulli(rate) ? S(0) : kept;
  return mask;
}

// Builds the per-token probability nodes for one sentence on an existing
// graph. rng is only consulted in train mode with nonzero dropout rates.
template <typename S>
std::vector<NodeId> sentence_forward(Graph<S>& g, const ModelNodes& nodes,
                                     const ModelConfig& cfg,
                                     const EncodedSentence& s, Mode mode,
                                     Rng* rng = nullptr) {
  if (s.word_ids.empty())
    throw ContractError("model forward needs a nonempty sentence");
  bool drop_in = mode == Mode::kTrain && cfg.dropout_input > 0.0;
  bool drop_out = mode == Mode::kTrain && cfg.dropout_output > 0.0;
  if ((drop_in || drop_out) && rng == nullptr)
    throw ContractError("train-mode forward with dropout needs an rng");

  std::vector<NodeId> xs = embed_lookup(g, nodes.word_table, s.word_ids);
  if (cfg.has_chars()) {
    if (!nodes.chars)
      throw CapabilityError("char+word forward on a model without a char encoder");
    if (s.char_ids.size() != s.word_ids.size())
      throw ContractError("per-word char ids missing for char+word forward");
    for (std::size_t i = 0; i < xs.size(); ++i) {
      NodeId cw = char_word_embed(g, *nodes.chars, s.char_ids[i]);
      xs[i] = g.concat({xs[i], cw});
    }
  }
  if (drop_in) {
    for (NodeId& x : xs) {
      Tensor<S> m = dropout_mask<S>(g.value(x).shape(), cfg.dropout_input, *rng);
      x = g.hadamard(x, g.constant(std::move(m)));
    }
  }
  std::vector<NodeId> states = bigru(g, nodes.sentence, xs);
  std::vector<NodeId> probs;
  probs.reserve(states.size());
  for (NodeId& h : states) {
    if (drop_out) {
      Tensor<S> m =
          dropout_mask<S>(g.value(h).shape(), cfg.dropout_output, *rng);
      h = g.hadamard(h, g.constant(std::move(m)));
    }
    probs.push_back(g.softmax(g.add(g.matmul(nodes.Wtag, h), nodes.btag)));
  }
  return probs;
}

// Convenience forward returning the (n x 3) probability rows as values.
template <typename S>
Tensor<S> model_forward(const ModelParams<S>& m, const EncodedSentence& s,
                        Mode mode = Mode::kInfer, Rng* rng = nullptr) {
  Graph<S> g;
  ModelNodes nodes = bind_model(g, m);
  std::vector<NodeId> probs = sentence_forward(g, nodes, m.config, s, mode, rng);
  Tensor<S> out(Shape{probs.size(), 3});
  for (std::size_t i = 0; i < probs.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out.at(i, c) = g.value(probs[i])[c];
  return out;
}

// Argmax tag per token. Ties favor O, then I, then B.
inline Tag argmax_tag(const float* q) {
  static constexpr int kOrder[3] = {1, 0, 2};
  int best = kOrder[0];
  for (int oi = 1; oi < 3; ++oi) {
    int cand = kOrder[oi];
    if (q[cand] > q[best]) best = cand;
  }
  return static_cast<Tag>(best);
}

template <typename S>
TagSequence predict_tags(const ModelParams<S>& m, const EncodedSentence& s) {
  Tensor<S> probs = model_forward(m, s, Mode::kInfer);
  TagSequence tags(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    float row[3];
    for (std::size_t c = 0; c < 3; ++c)
      row[c] = static_cast<float>(probs.at(i, c));
    tags[i] = argmax_tag(row);
  }
  return tags;
}

}  // namespace ote

#endif  // OTE_LAYERS_HPP
