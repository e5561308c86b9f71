#include "relicd/latent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relicd/errors.hpp"

namespace relicd {

std::vector<double> StudentPosterior::variance() const {
  std::vector<double> v(log_var.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(std::clamp(log_var[i], -Tape::kExpClamp, Tape::kExpClamp));
  return v;
}

void DropoutConfig::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("dropout alpha must be > 0");
  if (!(keep_probability > 0.0 && keep_probability <= 1.0)) {
    throw ValidationError("dropout keep_probability must be in (0, 1]");
  }
}

StudentPosterior posterior_of(std::size_t student, const ParameterStore& store) {
  const Matrix& mu = store[store.id(kMeanParam)].value;
  const Matrix& lv = store[store.id(kLogVarParam)].value;
  if (student >= mu.rows) throw std::out_of_range("posterior_of: student index out of range");
  auto m = mu.row(student);
  auto l = lv.row(student);
  return {{m.begin(), m.end()}, {l.begin(), l.end()}};
}

std::vector<double> draw_dropout_mask(std::size_t dim, const DropoutConfig& cfg, Rng& rng) {
  std::vector<double> mask(dim, 1.0);
  if (!cfg.enabled) return mask;
  std::bernoulli_distribution keep(cfg.keep_probability);
  for (auto& m : mask) m = keep(rng) ? 1.0 : 0.0;
  return mask;
}

std::vector<double> apply_variance_dropout(std::span<const double> variance, std::span<const double> mask,
                                           double alpha) {
  std::vector<double> out(variance.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? variance[i] : alpha;
  return out;
}

std::vector<double> apply_variance_dropout(std::span<const double> variance, const DropoutConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return {variance.begin(), variance.end()};
  return apply_variance_dropout(variance, draw_dropout_mask(variance.size(), cfg, rng), cfg.alpha);
}

std::vector<double> draw_standard_normal(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(dim);
  for (auto& e : eps) e = normal(rng);
  return eps;
}

AbilitySample sample_ability(std::span<const double> mean, std::span<const double> variance,
                             std::span<const double> eps) {
  if (mean.size() != variance.size() || mean.size() != eps.size()) {
    throw std::invalid_argument("sample_ability: length mismatch");
  }
  AbilitySample s;
  s.z.resize(mean.size());
  s.theta.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    s.z[i] = mean[i] + std::sqrt(variance[i]) * eps[i];
    s.theta[i] = stable_sigmoid(s.z[i]);
  }
  return s;
}

AbilitySample sample_ability(const StudentPosterior& posterior, std::span<const double> variance, Rng& rng) {
  const auto eps = draw_standard_normal(posterior.mean.size(), rng);
  return sample_ability(posterior.mean, variance, eps);
}

double kl_standard(std::span<const double> mean, std::span<const double> variance) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    kl += 0.5 * (mean[i] * mean[i] + variance[i] - std::log(variance[i]) - 1.0);
  }
  return kl;
}

double kl_consensus(std::span<const double> mean, std::span<const double> variance, const PriorConsensus& prior) {
  if (prior.mean.size() != mean.size()) throw std::invalid_argument("kl_consensus: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = mean[i] - prior.mean[i];
    kl += d * d + variance[i] - std::log(variance[i]) - 1.0;
  }
  return 0.5 * kl;
}

PriorConsensus compute_consensus(const Matrix& means) {
  if (means.rows == 0) throw std::invalid_argument("compute_consensus: no students");
  PriorConsensus prior;
  prior.mean.assign(means.cols, 0.0);
  for (std::size_t r = 0; r < means.rows; ++r) {
    for (std::size_t c = 0; c < means.cols; ++c) prior.mean[c] += means(r, c);
  }
  for (auto& m : prior.mean) m /= static_cast<double>(means.rows);
  return prior;
}

LatentNodes sample_on_tape(Tape& tape, const ParameterStore& store, std::size_t student,
                           std::span<const double> mask, double alpha, std::span<const double> eps) {
  LatentNodes n;
  n.mean = tape.row(store.id(kMeanParam), student);
  const auto var = tape.exp(tape.row(store.id(kLogVarParam), student));
  // mask * var + (1 - mask) * alpha
  std::vector<double> fallback(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) fallback[i] = (1.0 - mask[i]) * alpha;
  n.variance = tape.add(tape.mul(var, tape.constant(mask)), tape.constant(fallback));
  const auto z = tape.add(n.mean, tape.mul(tape.sqrt(n.variance), tape.constant(eps)));
  n.theta = tape.sigmoid(z);
  return n;
}

Tape::Var kl_on_tape(Tape& tape, Tape::Var mean, Tape::Var variance, std::span<const double> prior_mean) {
  const auto centered = prior_mean.empty() ? mean : tape.sub(mean, tape.constant(prior_mean));
  const auto inner = tape.sub(tape.add(tape.square(centered), variance), tape.log(variance));
  return tape.scale(tape.sum(tape.scale(inner, 1.0, -1.0)), 0.5);
}

}  // namespace relicd
