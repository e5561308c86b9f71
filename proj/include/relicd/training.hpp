#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "relicd/data.hpp"
#include "relicd/latent.hpp"
#include "relicd/metrics.hpp"
#include "relicd/model.hpp"
#include "relicd/numerics.hpp"
#include "relicd/tape.hpp"

namespace relicd {

// Sign of the variance term in the pairwise calibration hinge.
//   Assumption: max(0,  g(o_a,o_b) (var_a - var_b) + |o_a - o_b|)
//   Literal:    max(0, -g(o_a,o_b) (var_a - var_b) + |o_a - o_b|)
// Assumption drives lower variance onto cells with higher correctness.
enum class CalibrationMode { Assumption, Literal };

std::string_view to_string(CalibrationMode m);
CalibrationMode parse_calibration_mode(std::string_view s);

struct TrainConfig {
  double gamma = 1e-4;  // KL weight
  double beta = 0.1;    // calibration weight (phase 2 only)
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::size_t pretrain_epochs = 100;  // phase 1 cap
  std::size_t max_epochs = 100;       // phase 2 cap
  std::size_t patience = 10;          // epochs without validation-AUC gain
  std::uint64_t seed = 0;
  DropoutConfig dropout;
  CalibrationMode calibration_mode = CalibrationMode::Assumption;
  bool kl_dedup = false;  // count each student's KL once per batch
  std::size_t bins = 10;

  // Throws ValidationError listing every problem found.
  void validate() const;
};

// Cumulative per-(student, cell) counts of correct training predictions. A
// cell is a concept, or the single per-student cell under IRT.
class CorrectnessTracker {
 public:
  CorrectnessTracker() = default;
  CorrectnessTracker(std::size_t students, std::size_t cells_per_student);

  void update(std::size_t student, std::span<const std::uint32_t> cells, double prob, int label);

  // o = correct / total, or nullopt when the cell has no data yet.
  std::optional<double> frequency(std::size_t student, std::size_t cell) const;
  std::uint64_t correct(std::size_t student, std::size_t cell) const { return correct_[student * cells_ + cell]; }
  std::uint64_t total(std::size_t student, std::size_t cell) const { return total_[student * cells_ + cell]; }

  std::size_t students() const { return students_; }
  std::size_t cells_per_student() const { return cells_; }

  const std::vector<std::uint64_t>& correct_counts() const { return correct_; }
  const std::vector<std::uint64_t>& total_counts() const { return total_; }
  static CorrectnessTracker from_counts(std::size_t students, std::size_t cells, std::vector<std::uint64_t> correct,
                                        std::vector<std::uint64_t> total);

  bool operator==(const CorrectnessTracker&) const = default;

 private:
  std::size_t students_ = 0;
  std::size_t cells_ = 0;
  std::vector<std::uint64_t> correct_;
  std::vector<std::uint64_t> total_;
};

// Cells a prediction on `exercise` updates: its concepts, or {0} for IRT.
std::span<const std::uint32_t> tracker_cells(const Model& model, std::size_t exercise);

struct LossBreakdown {
  double pred = 0.0;
  double kl = 0.0;
  double rl = 0.0;
  double total = 0.0;
};

// -[r log y + (1 - r) log(1 - y)] with y kept inside [1e-12, 1 - 1e-12].
double prediction_loss(double prob, int label);

double calibration_pair_loss(double var_a, double var_b, double o_a, double o_b, CalibrationMode mode);

// One calibration pair: two batch positions, the variance cell drawn for each
// and the tracker frequencies of those cells.
struct PairSample {
  std::size_t pos_a = 0;
  std::size_t cell_a = 0;
  double o_a = 0.0;
  std::size_t pos_b = 0;
  std::size_t cell_b = 0;
  double o_b = 0.0;
};

// Draws `count` pairs of distinct batch positions, one cell per position
// uniformly from the exercise's concepts, and drops pairs touching a cell
// with no tracker data. Batches of fewer than two instances yield nothing.
std::vector<PairSample> sample_pairs(std::span<const Interaction> batch, const Model& model,
                                     const CorrectnessTracker& tracker, std::size_t count, Rng& rng);

// Randomness consumed by one batch objective: Gaussian noise and dropout
// keep-masks per instance, plus the calibration pairs.
struct BatchNoise {
  std::vector<std::vector<double>> eps;
  std::vector<std::vector<double>> mask;
  std::vector<PairSample> pairs;
};

BatchNoise draw_noise(std::size_t batch_size, std::size_t dim, const DropoutConfig& dropout, Rng& sampling,
                      Rng& dropout_rng);

struct ObjectiveWeights {
  double gamma = 0.0;
  double beta = 0.0;
  double alpha = 0.5;  // dropout fallback variance
  CalibrationMode mode = CalibrationMode::Assumption;
  bool kl_dedup = false;
};

struct BatchResult {
  LossBreakdown loss;
  std::vector<double> predictions;  // the sampled y of each instance
};

// L = mean BCE + gamma * mean KL + beta * mean pair hinge, on one batch with
// fixed noise. An empty prior_mean selects the standard normal prior. When
// backprop is set, gradients are accumulated into model.store.
BatchResult batch_loss(Model& model, std::span<const Interaction> batch, const BatchNoise& noise,
                       std::span<const double> prior_mean, const ObjectiveWeights& weights, Tape& tape,
                       bool backprop = true);

struct EpochLog {
  int phase = 1;
  std::size_t epoch = 0;
  LossBreakdown loss;  // batch means
  std::optional<double> val_acc;
  std::optional<double> val_auc;
  std::optional<double> val_ece;
};

struct TrainObserver {
  std::function<void(int phase, std::span<const Interaction> batch, const BatchResult&)> on_batch;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Model model;
  PriorConsensus prior;
  CorrectnessTracker tracker;
  std::vector<EpochLog> log;
  int best_phase = 0;  // 0 when nothing was trained
  std::size_t best_epoch = 0;
  std::optional<MetricReport> validation;
  // Phase-2 state after its last epoch, before the best snapshot is restored.
  Model final_model;
  CorrectnessTracker final_tracker;
};

// Two-phase training: phase 1 (beta = 0, standard-normal prior) with early
// stopping on validation AUC, then the prior mean is set to the average
// student mean, Adam state is reset, and phase 2 trains the full objective.
// The returned model holds the best-validation-AUC parameters of phase 2 (or
// of phase 1 if phase 2 has no epochs).
TrainResult train(const Dataset& dataset, const Split& split, const DiagnosticConfig& diagnostic,
                  const TrainConfig& cfg, const TrainObserver* observer = nullptr);

struct Evaluation {
  std::vector<ScoredPair> pairs;
  double acc = 0.0;
  double rmse = 0.0;
  std::optional<double> auc;  // absent for single-class splits
  BinReport calibration;
};

// Deterministic predictions (theta = sigmoid(mu)) scored on the given interactions.
Evaluation evaluate(const Model& model, const Dataset& dataset, std::span<const std::size_t> indices,
                    std::size_t bins = 10);

}  // namespace relicd
