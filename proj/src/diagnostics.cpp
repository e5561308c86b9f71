#include "relicd/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

#include "relicd/errors.hpp"

namespace relicd {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Irt: return "irt";
    case Variant::Mirt: return "mirt";
    case Variant::Ncd: return "ncd";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "irt") return Variant::Irt;
  if (lower == "mirt") return Variant::Mirt;
  if (lower == "ncd") return Variant::Ncd;
  throw ValidationError("unknown diagnostic variant '" + std::string(s) + "' (expected irt, mirt or ncd)");
}

std::size_t latent_dim(Variant v, std::size_t concept_count) {
  return v == Variant::Irt ? 1 : concept_count;
}

ExerciseParams exercise_params(std::size_t exercise, const ParameterStore& store) {
  const Matrix& diff = store[store.id(kDifficultyParam)].value;
  if (exercise >= diff.rows) throw std::out_of_range("exercise_params: exercise index out of range");
  ExerciseParams p;
  p.difficulty.reserve(diff.cols);
  for (double x : diff.row(exercise)) p.difficulty.push_back(stable_sigmoid(x));
  if (auto disc = store.find(kDiscriminationParam)) {
    p.discrimination = stable_sigmoid(store[*disc].value(exercise, 0));
  }
  return p;
}

double predict_irt(double theta, double difficulty, double discrimination, double scale) {
  return stable_sigmoid(scale * discrimination * (theta - difficulty));
}

double predict_mirt(std::span<const double> theta, std::span<const double> difficulty,
                    std::span<const double> q_row) {
  double logit = 0.0;
  for (std::size_t l = 0; l < theta.size(); ++l) {
    if (q_row[l] != 0.0) logit += q_row[l] * (theta[l] - difficulty[l]);
  }
  return stable_sigmoid(logit);
}

NcdLayers ncd_layers(const ParameterStore& store) {
  return {store[store.id(kNcdW1)].value, store[store.id(kNcdB1)].value, store[store.id(kNcdW2)].value,
          store[store.id(kNcdB2)].value, store[store.id(kNcdW3)].value, store[store.id(kNcdB3)].value};
}

namespace {

std::vector<double> dense_sigmoid_layer(const Matrix& w, const Matrix& b, std::span<const double> x) {
  std::vector<double> y(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double acc = b.data[i];
    const double* wr = w.data.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) acc += wr[j] * x[j];
    y[i] = stable_sigmoid(acc);
  }
  return y;
}

void clamp_nonnegative(Matrix& m) {
  for (auto& x : m.data) x = std::max(0.0, x);
}

}  // namespace

double predict_ncd(std::span<const double> theta, std::span<const double> difficulty, double discrimination,
                   std::span<const double> q_row, const NcdLayers& mlp) {
  std::vector<double> x(theta.size());
  for (std::size_t l = 0; l < x.size(); ++l) x[l] = q_row[l] * (theta[l] - difficulty[l]) * discrimination;
  const auto h1 = dense_sigmoid_layer(mlp.w1, mlp.b1, x);
  const auto h2 = dense_sigmoid_layer(mlp.w2, mlp.b2, h1);
  return dense_sigmoid_layer(mlp.w3, mlp.b3, h2)[0];
}

void clamp_ncd_weights(NcdLayers& mlp) {
  clamp_nonnegative(mlp.w1);
  clamp_nonnegative(mlp.w2);
  clamp_nonnegative(mlp.w3);
}

void clamp_ncd_weights(ParameterStore& store) {
  for (const char* name : {kNcdW1, kNcdW2, kNcdW3}) {
    if (auto id = store.find(name)) clamp_nonnegative(store[*id].value);
  }
}

void add_diagnostic_params(ParameterStore& store, const DiagnosticConfig& cfg, std::size_t exercise_count,
                           std::size_t concept_count, Rng& rng) {
  const std::size_t d = latent_dim(cfg.variant, concept_count);
  store.add(kDifficultyParam, xavier_init(d, exercise_count, rng));
  if (cfg.variant != Variant::Mirt) {
    store.add(kDiscriminationParam, xavier_init(1, exercise_count, rng));
  }
  if (cfg.variant == Variant::Ncd) {
    store.add(kNcdW1, xavier_init(concept_count, cfg.hidden1, rng));
    store.add(kNcdB1, Matrix(1, cfg.hidden1));
    store.add(kNcdW2, xavier_init(cfg.hidden1, cfg.hidden2, rng));
    store.add(kNcdB2, Matrix(1, cfg.hidden2));
    store.add(kNcdW3, xavier_init(cfg.hidden2, 1, rng));
    store.add(kNcdB3, Matrix(1, 1));
  }
}

Tape::Var predict_on_tape(Tape& tape, const ParameterStore& store, const DiagnosticConfig& cfg, Tape::Var theta,
                          std::size_t exercise, std::span<const double> q_row) {
  const auto diff = tape.sigmoid(tape.row(store.id(kDifficultyParam), exercise));
  const auto gap = tape.sub(theta, diff);
  switch (cfg.variant) {
    case Variant::Irt: {
      const auto disc = tape.sigmoid(tape.row(store.id(kDiscriminationParam), exercise));
      return tape.sigmoid(tape.scale(tape.mul(disc, gap), cfg.irt_scale));
    }
    case Variant::Mirt:
      return tape.sigmoid(tape.sum(tape.mul(gap, tape.constant(q_row))));
    case Variant::Ncd: {
      const auto disc = tape.sigmoid(tape.row(store.id(kDiscriminationParam), exercise));
      const auto x = tape.mul(tape.mul(gap, tape.constant(q_row)), disc);
      const auto h1 = tape.sigmoid(tape.add(tape.matvec(store.id(kNcdW1), x), tape.param(store.id(kNcdB1))));
      const auto h2 = tape.sigmoid(tape.add(tape.matvec(store.id(kNcdW2), h1), tape.param(store.id(kNcdB2))));
      return tape.sigmoid(tape.add(tape.matvec(store.id(kNcdW3), h2), tape.param(store.id(kNcdB3))));
    }
  }
  throw std::logic_error("predict_on_tape: unknown variant");
}

}  // namespace relicd
