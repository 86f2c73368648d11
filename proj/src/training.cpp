#include "ote/training.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace ote {

namespace {

constexpr std::uint64_t kSplitSalt = 0x5e11f001;
constexpr std::uint64_t kBatchSalt = 0xba7c4e5;
constexpr std::uint64_t kDropoutSalt = 0xd20b0a57;

}  // namespace

void write_report(std::ostream& out, const TrainReport& report) {
  char buf[64];
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f", i + 1,
                  report.epochs[i].loss, report.epochs[i].val_f1);
    out << buf << "\n";
  }
  out << "best_epoch\t" << report.best_epoch << "\n";
  out << "stop_reason\t" << report.stop_reason << "\n";
}

double exact_match_f1(const ModelParams<float>& m,
                      const std::vector<EncodedSentence>& sentences) {
  std::vector<std::vector<TokenSpan>> gold, pred;
  gold.reserve(sentences.size());
  pred.reserve(sentences.size());
  for (const EncodedSentence& s : sentences) {
    if (s.word_ids.empty()) continue;
    gold.push_back(decode_tags(s.gold));
    pred.push_back(decode_tags(predict_tags(m, s)));
  }
  return exact_match_prf(gold, pred).f1;
}

TrainReport train_with_validation(ModelParams<float>& m,
                                  const std::vector<EncodedSentence>& train,
                                  const std::vector<EncodedSentence>& val,
                                  const TrainConfig& cfg) {
  cfg.validate();
  std::vector<const EncodedSentence*> usable;
  for (const EncodedSentence& s : train) {
    if (!s.word_ids.empty()) usable.push_back(&s);
  }
  if (usable.empty())
    throw ValidationError("training set has no nonempty sentences");

  AdamState<float> adam;
  ParamPtrs<float> params = param_refs(m);
  Rng dropout_rng(Rng::seed_mix(cfg.seed, kDropoutSalt));

  TrainReport report;
  ModelParams<float> best = m;
  double best_f1 = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto groups = epoch_batches(usable.size(), cfg.batch_size,
                                Rng::seed_mix(cfg.seed, kBatchSalt), epoch);
    double loss_sum = 0.0;
    for (const auto& group : groups) {
      std::vector<const EncodedSentence*> batch;
      batch.reserve(group.size());
      for (std::size_t idx : group) batch.push_back(usable[idx]);
      Graph<float> g;
      NodeId loss =
          batch_loss_node(g, m, batch, cfg, Mode::kTrain, &dropout_rng);
      loss_sum += static_cast<double>(g.value(loss).scalar_value());
      g.backward(loss);
      GradMap<float> grads = g.parameter_gradients();
      global_norm_clip(grads, cfg.max_norm);
      adam_step(adam, params, grads, cfg);
    }
    EpochStat stat;
    stat.loss = loss_sum / static_cast<double>(groups.size());
    stat.val_f1 = val.empty() ? 0.0 : exact_match_f1(m, val);
    report.epochs.push_back(stat);

    if (stat.val_f1 > best_f1) {
      best_f1 = stat.val_f1;
      best = m;
      report.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) {
        report.stop_reason = "patience";
        break;
      }
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
  report.best_val_f1 = best_f1 < 0.0 ? 0.0 : best_f1;
  m = best;
  return report;
}

TrainReport train_model(ModelParams<float>& m,
                        const std::vector<EncodedSentence>& corpus,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw ValidationError("training corpus is empty");
  if (corpus.size() < 2)
    throw ValidationError("need at least 2 sentences to hold out validation");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(Rng::seed_mix(cfg.seed, kSplitSalt));
  rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(
      static_cast<double>(corpus.size()) * cfg.val_fraction);
  n_val = std::clamp<std::size_t>(n_val, 1, corpus.size() - 1);
  std::vector<EncodedSentence> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < corpus.size() - n_val) {
      train.push_back(corpus[order[i]]);
    } else {
      val.push_back(corpus[order[i]]);
    }
  }
  return train_with_validation(m, train, val, cfg);
}

}  // namespace ote
