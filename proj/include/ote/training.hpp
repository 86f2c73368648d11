#ifndef OTE_TRAINING_HPP
#define OTE_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ote/data.hpp"
#include "ote/encoding.hpp"
#include "ote/error.hpp"
#include "ote/evaluation.hpp"
#include "ote/graph.hpp"
#include "ote/layers.hpp"
#include "ote/rng.hpp"

namespace ote {

struct TrainConfig {
  std::size_t batch_size = 5;
  double max_norm = 5.0;
  double l2_coeff = 1e-5;
  // L2 applies to exactly these parameters; names missing from the model
  // (chr.Wcw on word-only) are skipped.
  std::vector<std::string> l2_params = {"tag.W", "chr.Wcw"};
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Default dropout knob; the CLI copies it into both ModelConfig rates.
  double dropout_rate = 0.5;
  std::size_t max_epochs = 150;
  std::size_t patience = 25;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;

  void validate() const {
    if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
    if (max_norm <= 0) throw ValidationError("max_norm must be positive");
    if (l2_coeff < 0) throw ValidationError("l2_coeff must be >= 0");
    if (learning_rate <= 0)
      throw ValidationError("learning_rate must be positive");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
      throw ValidationError("val_fraction must be in (0,1)");
    if (patience == 0)
      throw ValidationError("patience must be >= 1 (0 would never train)");
    if (max_epochs == 0) throw ValidationError("max_epochs must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ValidationError("dropout_rate must be in [0,1)");
  }
};

template <typename S>
using ParamPtrs = std::vector<std::pair<std::string, Tensor<S>*>>;

template <typename S>
ParamPtrs<S> param_refs(ModelParams<S>& m) {
  ParamPtrs<S> out;
  m.for_each_param(
      [&](const std::string& name, Tensor<S>& t) { out.emplace_back(name, &t); });
  return out;
}

// Adam moments keyed by parameter name; allocated lazily on first use.
template <typename S>
struct AdamState {
  std::map<std::string, Tensor<S>> m;
  std::map<std::string, Tensor<S>> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update over all parameters. Gradients missing a
// parameter leave it untouched (zero gradients still advance moments).
template <typename S>
void adam_step(AdamState<S>& state, const ParamPtrs<S>& params,
               const GradMap<S>& grads, const TrainConfig& cfg) {
  ++state.t;
  double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (const auto& [name, param] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor<S>& g = git->second;
    if (!g.same_shape(*param)) {
      throw ShapeError("adam_step: gradient shape " + shape_str(g.shape()) +
                       " mismatches parameter " + name + " " +
                       shape_str(param->shape()));
    }
    auto [mit, fresh_m] = state.m.try_emplace(name, Tensor<S>::zeros(g.shape()));
    auto [vit, fresh_v] = state.v.try_emplace(name, Tensor<S>::zeros(g.shape()));
    (void)fresh_m;
    (void)fresh_v;
    Tensor<S>& m1 = mit->second;
    Tensor<S>& m2 = vit->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gi = static_cast<double>(g[i]);
      double m1i = cfg.adam_beta1 * static_cast<double>(m1[i]) +
                   (1.0 - cfg.adam_beta1) * gi;
      double m2i = cfg.adam_beta2 * static_cast<double>(m2[i]) +
                   (1.0 - cfg.adam_beta2) * gi * gi;
      m1[i] = static_cast<S>(m1i);
      m2[i] = static_cast<S>(m2i);
      double mhat = m1i / bc1;
      double vhat = m2i / bc2;
      (*param)[i] = static_cast<S>(
          static_cast<double>((*param)[i]) -
          cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

// Mean token cross-entropy over the batch plus the selective L2 term,
// built on the given graph so backward() covers the whole objective.
template <typename S>
NodeId batch_loss_node(Graph<S>& g, const ModelParams<S>& m,
                       const std::vector<const EncodedSentence*>& batch,
                       const TrainConfig& cfg, Mode mode, Rng* rng) {
  if (batch.empty()) throw ContractError("batch_loss on an empty batch");
  ModelNodes nodes = bind_model(g, m);
  std::vector<NodeId> token_losses;
  for (const EncodedSentence* s : batch) {
    if (s->gold.size() != s->word_ids.size())
      throw ContractError("batch_loss needs gold tags for every token");
    std::vector<NodeId> probs =
        sentence_forward(g, nodes, m.config, *s, mode, rng);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      token_losses.push_back(g.cross_entropy(
          probs[i], static_cast<std::size_t>(s->gold[i])));
    }
  }
  NodeId loss = g.mean(token_losses);
  if (cfg.l2_coeff > 0) {
    const auto& registered = g.parameters();
    NodeId penalty{};
    bool have = false;
    for (const std::string& name : cfg.l2_params) {
      auto it = registered.find(name);
      if (it == registered.end()) continue;
      NodeId p{it->second};
      NodeId sq = g.sum(g.hadamard(p, p));
      penalty = have ? g.add(penalty, sq) : sq;
      have = true;
    }
    if (have) {
      loss = g.add(loss, g.scale(penalty, static_cast<S>(cfg.l2_coeff)));
    }
  }
  return loss;
}

template <typename S>
S batch_loss_value(const ModelParams<S>& m,
                   const std::vector<const EncodedSentence*>& batch,
                   const TrainConfig& cfg, Mode mode = Mode::kTrain,
                   Rng* rng = nullptr) {
  Graph<S> g;
  return g.value(batch_loss_node(g, m, batch, cfg, mode, rng)).scalar_value();
}

struct EpochStat {
  double loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_f1 = 0.0;
  std::string stop_reason;     // "patience" or "max_epochs"
};

void write_report(std::ostream& out, const TrainReport& report);

// Exact-match F1 of the model against the gold tags of `sentences`,
// dropout off.
double exact_match_f1(const ModelParams<float>& m,
                      const std::vector<EncodedSentence>& sentences);

// Epoch loop on an explicit train/validation split: batches, loss,
// backward, clip, Adam; keeps the best-validation snapshot and restores it
// before returning. Early-stops after `patience` epochs without
// improvement.
TrainReport train_with_validation(ModelParams<float>& m,
                                  const std::vector<EncodedSentence>& train,
                                  const std::vector<EncodedSentence>& val,
                                  const TrainConfig& cfg);

// The full protocol: deterministic seeded shuffle, 80/20 split (by
// val_fraction), then train_with_validation.
TrainReport train_model(ModelParams<float>& m,
                        const std::vector<EncodedSentence>& corpus,
                        const TrainConfig& cfg);

}  // namespace ote

#endif  // OTE_TRAINING_HPP
