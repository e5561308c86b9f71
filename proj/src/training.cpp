#include "relicd/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_set>

#include "relicd/errors.hpp"

namespace relicd {

std::string_view to_string(CalibrationMode m) {
  return m == CalibrationMode::Assumption ? "assumption" : "literal";
}

CalibrationMode parse_calibration_mode(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "assumption" || lower == "assumption-consistent") return CalibrationMode::Assumption;
  if (lower == "literal" || lower == "literal-eq12") return CalibrationMode::Literal;
  throw ValidationError("unknown calibration mode '" + std::string(s) + "' (expected assumption or literal)");
}

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (!(gamma >= 0.0)) errors.push_back("gamma must be >= 0");
  if (!(beta >= 0.0)) errors.push_back("beta must be >= 0");
  if (batch_size < 2) errors.push_back("batch_size must be >= 2");
  if (!(adam.learning_rate > 0.0)) errors.push_back("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) errors.push_back("adam_beta1 must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) errors.push_back("adam_beta2 must be in [0, 1)");
  if (!(adam.epsilon > 0.0)) errors.push_back("adam_epsilon must be > 0");
  if (patience == 0) errors.push_back("patience must be >= 1");
  if (!(dropout.alpha > 0.0)) errors.push_back("dropout_alpha must be > 0");
  if (!(dropout.keep_probability > 0.0 && dropout.keep_probability <= 1.0)) {
    errors.push_back("dropout_keep_probability must be in (0, 1]");
  }
  if (bins == 0) errors.push_back("bins must be >= 1");
  if (!errors.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

CorrectnessTracker::CorrectnessTracker(std::size_t students, std::size_t cells_per_student)
    : students_(students),
      cells_(cells_per_student),
      correct_(students * cells_per_student, 0),
      total_(students * cells_per_student, 0) {}

CorrectnessTracker CorrectnessTracker::from_counts(std::size_t students, std::size_t cells,
                                                   std::vector<std::uint64_t> correct,
                                                   std::vector<std::uint64_t> total) {
  if (correct.size() != students * cells || total.size() != students * cells) {
    throw ValidationError("tracker counts have the wrong size");
  }
  for (std::size_t i = 0; i < correct.size(); ++i) {
    if (correct[i] > total[i]) throw ValidationError("tracker has correct > total");
  }
  CorrectnessTracker t;
  t.students_ = students;
  t.cells_ = cells;
  t.correct_ = std::move(correct);
  t.total_ = std::move(total);
  return t;
}

void CorrectnessTracker::update(std::size_t student, std::span<const std::uint32_t> cells, double prob, int label) {
  const bool hit = predicted_correctly(prob, label);
  for (auto c : cells) {
    const std::size_t k = student * cells_ + c;
    ++total_[k];
    if (hit) ++correct_[k];
  }
}

std::optional<double> CorrectnessTracker::frequency(std::size_t student, std::size_t cell) const {
  const std::size_t k = student * cells_ + cell;
  if (total_[k] == 0) return std::nullopt;
  return static_cast<double>(correct_[k]) / static_cast<double>(total_[k]);
}

std::span<const std::uint32_t> tracker_cells(const Model& model, std::size_t exercise) {
  static constexpr std::uint32_t kSingleCell[] = {0};
  if (model.diagnostic.variant == Variant::Irt) return kSingleCell;
  return model.q_rows[exercise];
}

double prediction_loss(double prob, int label) {
  const double y = std::clamp(prob, 1e-12, 1.0 - 1e-12);
  return label == 1 ? -std::log(y) : -std::log(1.0 - y);
}

double calibration_pair_loss(double var_a, double var_b, double o_a, double o_b, CalibrationMode mode) {
  const double g = o_a > o_b ? 1.0 : (o_a == o_b ? 0.0 : -1.0);
  const double sign = mode == CalibrationMode::Assumption ? 1.0 : -1.0;
  return std::max(0.0, sign * g * (var_a - var_b) + std::abs(o_a - o_b));
}

std::vector<PairSample> sample_pairs(std::span<const Interaction> batch, const Model& model,
                                     const CorrectnessTracker& tracker, std::size_t count, Rng& rng) {
  std::vector<PairSample> pairs;
  const std::size_t n = batch.size();
  if (n < 2) return pairs;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  auto draw_cell = [&](std::size_t pos) -> std::size_t {
    const auto cells = tracker_cells(model, batch[pos].exercise);
    if (cells.size() == 1) return cells[0];
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    return cells[pick(rng)];
  };
  for (std::size_t k = 0; k < count; ++k) {
    PairSample p;
    p.pos_a = first(rng);
    p.pos_b = second(rng);
    if (p.pos_b >= p.pos_a) ++p.pos_b;
    p.cell_a = draw_cell(p.pos_a);
    p.cell_b = draw_cell(p.pos_b);
    const auto oa = tracker.frequency(batch[p.pos_a].student, p.cell_a);
    const auto ob = tracker.frequency(batch[p.pos_b].student, p.cell_b);
    if (!oa || !ob) continue;
    p.o_a = *oa;
    p.o_b = *ob;
    pairs.push_back(p);
  }
  return pairs;
}

BatchNoise draw_noise(std::size_t batch_size, std::size_t dim, const DropoutConfig& dropout, Rng& sampling,
                      Rng& dropout_rng) {
  BatchNoise noise;
  noise.eps.reserve(batch_size);
  noise.mask.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    noise.eps.push_back(draw_standard_normal(dim, sampling));
    noise.mask.push_back(draw_dropout_mask(dim, dropout, dropout_rng));
  }
  return noise;
}

namespace {

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericsError(std::string("non-finite loss term ") + term);
}

Tape::Var mean_of(Tape& tape, std::span<const Tape::Var> terms) {
  if (terms.empty()) return tape.constant(0.0);
  Tape::Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

BatchResult batch_loss(Model& model, std::span<const Interaction> batch, const BatchNoise& noise,
                       std::span<const double> prior_mean, const ObjectiveWeights& weights, Tape& tape,
                       bool backprop) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (noise.eps.size() != batch.size() || noise.mask.size() != batch.size()) {
    throw std::invalid_argument("batch_loss: noise does not match the batch");
  }
  tape.clear();
  std::vector<Tape::Var> bce;
  std::vector<Tape::Var> kl;
  std::vector<Tape::Var> variances;
  std::vector<Tape::Var> probs;
  bce.reserve(batch.size());
  kl.reserve(batch.size());
  variances.reserve(batch.size());
  probs.reserve(batch.size());
  std::unordered_set<std::uint32_t> seen;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& it = batch[i];
    if (it.student >= model.students || it.exercise >= model.exercises()) {
      throw std::out_of_range("batch_loss: interaction index out of range");
    }
    const auto latent = sample_on_tape(tape, model.store, it.student, noise.mask[i], weights.alpha, noise.eps[i]);
    const auto y = predict_on_tape(tape, model.store, model.diagnostic, latent.theta, it.exercise,
                                   model.q_row(it.exercise));
    // log() floors its argument at 1e-12
    const auto ll = it.score == 1 ? tape.log(y) : tape.log(tape.scale(y, -1.0, 1.0));
    bce.push_back(tape.scale(ll, -1.0));
    if (!weights.kl_dedup || seen.insert(it.student).second) {
      kl.push_back(kl_on_tape(tape, latent.mean, latent.variance, prior_mean));
    }
    variances.push_back(latent.variance);
    probs.push_back(y);
  }

  std::vector<Tape::Var> hinge;
  hinge.reserve(noise.pairs.size());
  const double sign = weights.mode == CalibrationMode::Assumption ? 1.0 : -1.0;
  for (const auto& p : noise.pairs) {
    const double g = p.o_a > p.o_b ? 1.0 : (p.o_a == p.o_b ? 0.0 : -1.0);
    const auto va = tape.pick(variances.at(p.pos_a), p.cell_a);
    const auto vb = tape.pick(variances.at(p.pos_b), p.cell_b);
    hinge.push_back(tape.relu(tape.scale(tape.sub(va, vb), sign * g, std::abs(p.o_a - p.o_b))));
  }

  const auto l_pred = mean_of(tape, bce);
  const auto l_kl = mean_of(tape, kl);
  const auto l_rl = mean_of(tape, hinge);
  const auto total = tape.add(tape.add(l_pred, tape.scale(l_kl, weights.gamma)), tape.scale(l_rl, weights.beta));

  BatchResult result;
  result.loss.pred = tape.scalar(l_pred);
  result.loss.kl = tape.scalar(l_kl);
  result.loss.rl = tape.scalar(l_rl);
  result.loss.total = tape.scalar(total);
  require_finite(result.loss.pred, "L_pred");
  require_finite(result.loss.kl, "L_KL");
  require_finite(result.loss.rl, "L_RL");
  require_finite(result.loss.total, "total");
  result.predictions.reserve(probs.size());
  for (auto y : probs) result.predictions.push_back(tape.scalar(y));

  if (backprop) tape.backward(total);
  return result;
}

Evaluation evaluate(const Model& model, const Dataset& dataset, std::span<const std::size_t> indices,
                    std::size_t bins) {
  if (indices.empty()) throw ValidationError("evaluate: empty split");
  for (auto i : indices) {
    if (i >= dataset.interactions.size()) throw ValidationError("evaluate: interaction index out of range");
  }
  const auto probs = model.predict(dataset.interactions, indices);
  Evaluation ev;
  ev.pairs.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    ev.pairs.push_back({probs[k], dataset.interactions[indices[k]].score});
  }
  ev.acc = accuracy(ev.pairs);
  ev.rmse = rmse(ev.pairs);
  try {
    ev.auc = auc(ev.pairs);
  } catch (const std::invalid_argument&) {
    ev.auc.reset();
  }
  ev.calibration = calibration(ev.pairs, bins);
  return ev;
}

namespace {

struct Snapshot {
  std::vector<Matrix> values;
  CorrectnessTracker tracker;
  std::size_t epoch = 0;
  double score = -std::numeric_limits<double>::infinity();
  std::optional<MetricReport> metrics;
};

std::vector<Matrix> values_of(const ParameterStore& store) {
  std::vector<Matrix> v;
  for (const auto& p : store.params()) v.push_back(p.value);
  return v;
}

void restore(ParameterStore& store, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) store.params()[i].value = values[i];
}

}  // namespace

TrainResult train(const Dataset& dataset, const Split& split, const DiagnosticConfig& diagnostic,
                  const TrainConfig& cfg, const TrainObserver* observer) {
  cfg.validate();
  if (split.train.empty() || split.validation.empty()) throw ValidationError("train: empty train or validation split");

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng sampling_rng(derive_seed(cfg.seed, "sampling"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  Rng pairing_rng(derive_seed(cfg.seed, "pairing"));

  TrainResult result{Model::create(diagnostic, dataset.student_count(), dataset.concept_count(), dataset.q_rows,
                                   init_rng),
                     {}, {}, {}, 0, 0, std::nullopt, {}, {}};
  Model& model = result.model;
  const std::size_t cells = diagnostic.variant == Variant::Irt ? 1 : dataset.concept_count();
  CorrectnessTracker tracker(dataset.student_count(), cells);
  Tape tape(model.store);
  std::vector<Interaction> batch;

  auto run_phase = [&](int phase, std::size_t max_epochs, std::span<const double> prior_mean) {
    ObjectiveWeights w;
    w.gamma = cfg.gamma;
    w.beta = phase == 1 ? 0.0 : cfg.beta;
    w.alpha = cfg.dropout.alpha;
    w.mode = cfg.calibration_mode;
    w.kl_dedup = cfg.kl_dedup;

    Snapshot best;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
      EpochLog log;
      log.phase = phase;
      log.epoch = epoch;
      const auto batches = make_batches(split.train, cfg.batch_size, shuffle_rng);
      for (const auto& idx : batches) {
        batch.clear();
        for (auto i : idx) batch.push_back(dataset.interactions[i]);
        auto noise = draw_noise(batch.size(), model.dim, cfg.dropout, sampling_rng, dropout_rng);
        if (phase == 2) noise.pairs = sample_pairs(batch, model, tracker, batch.size(), pairing_rng);
        const auto res = batch_loss(model, batch, noise, prior_mean, w, tape);
        if (observer && observer->on_batch) observer->on_batch(phase, batch, res);
        if (phase == 2) {
          for (std::size_t k = 0; k < batch.size(); ++k) {
            tracker.update(batch[k].student, tracker_cells(model, batch[k].exercise), res.predictions[k],
                           batch[k].score);
          }
        }
        adam_step(model.store, cfg.adam);
        if (diagnostic.variant == Variant::Ncd) clamp_ncd_weights(model.store);
        log.loss.pred += res.loss.pred;
        log.loss.kl += res.loss.kl;
        log.loss.rl += res.loss.rl;
        log.loss.total += res.loss.total;
      }
      const double nb = static_cast<double>(std::max<std::size_t>(1, batches.size()));
      log.loss.pred /= nb;
      log.loss.kl /= nb;
      log.loss.rl /= nb;
      log.loss.total /= nb;

      const auto ev = evaluate(model, dataset, split.validation, cfg.bins);
      log.val_acc = ev.acc;
      log.val_auc = ev.auc;
      log.val_ece = ev.calibration.ece;
      result.log.push_back(log);
      if (observer && observer->on_epoch) observer->on_epoch(log);

      const double score = ev.auc ? *ev.auc : ev.acc;
      if (score > best.score) {
        best.score = score;
        best.epoch = epoch;
        best.values = values_of(model.store);
        best.tracker = tracker;
        if (ev.auc) {
          best.metrics = MetricReport{ev.acc, ev.rmse, *ev.auc, ev.calibration.ece, ev.calibration.mce};
        } else {
          best.metrics.reset();
        }
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
    if (phase == 2) {
      result.final_model = model;
      result.final_tracker = tracker;
    }
    if (best.epoch > 0) {
      restore(model.store, best.values);
      tracker = best.tracker;
      result.best_phase = phase;
      result.best_epoch = best.epoch;
      result.validation = best.metrics;
    }
  };

  run_phase(1, cfg.pretrain_epochs, {});

  result.prior = compute_consensus(model.store[model.store.id(kMeanParam)].value);
  model.store.reset_moments();
  model.store.zero_grad();

  run_phase(2, cfg.max_epochs, result.prior.mean);

  result.tracker = std::move(tracker);
  return result;
}

}  // namespace relicd
