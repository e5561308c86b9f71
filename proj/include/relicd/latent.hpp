#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "relicd/numerics.hpp"
#include "relicd/tape.hpp"

namespace relicd {

inline constexpr const char* kMeanParam = "W_mu";
inline constexpr const char* kLogVarParam = "W_sigma";

// Diagonal Gaussian over a student's latent ability: rows of W_mu and W_sigma
// (the latter holding log-variances).
struct StudentPosterior {
  std::vector<double> mean;
  std::vector<double> log_var;

  std::vector<double> variance() const;
};

// Prior N(mean, 1) shared by all students.
struct PriorConsensus {
  std::vector<double> mean;
};

struct DropoutConfig {
  double alpha = 0.5;
  double keep_probability = 0.5;
  bool enabled = true;

  void validate() const;
};

StudentPosterior posterior_of(std::size_t student, const ParameterStore& store);

// Bernoulli(keep_probability) keep mask; all ones when dropout is disabled.
std::vector<double> draw_dropout_mask(std::size_t dim, const DropoutConfig& cfg, Rng& rng);

// mask * (var - alpha) + alpha, entry by entry.
std::vector<double> apply_variance_dropout(std::span<const double> variance, std::span<const double> mask,
                                           double alpha);
std::vector<double> apply_variance_dropout(std::span<const double> variance, const DropoutConfig& cfg, Rng& rng);

std::vector<double> draw_standard_normal(std::size_t dim, Rng& rng);

struct AbilitySample {
  std::vector<double> z;
  std::vector<double> theta;
};

// z = mean + sqrt(var) * eps, theta = sigmoid(z).
AbilitySample sample_ability(std::span<const double> mean, std::span<const double> variance,
                             std::span<const double> eps);
AbilitySample sample_ability(const StudentPosterior& posterior, std::span<const double> variance, Rng& rng);

// Sum over dims of 1/2 (mu^2 + var - ln var - 1).
double kl_standard(std::span<const double> mean, std::span<const double> variance);
// Same against N(prior.mean, 1).
double kl_consensus(std::span<const double> mean, std::span<const double> variance, const PriorConsensus& prior);

// Elementwise mean over the rows of W_mu.
PriorConsensus compute_consensus(const Matrix& means);

// Differentiable pieces used by the training objective.
struct LatentNodes {
  Tape::Var mean;
  Tape::Var variance;  // after dropout
  Tape::Var theta;
};

LatentNodes sample_on_tape(Tape& tape, const ParameterStore& store, std::size_t student,
                           std::span<const double> mask, double alpha, std::span<const double> eps);

// An empty prior_mean means the standard normal prior.
Tape::Var kl_on_tape(Tape& tape, Tape::Var mean, Tape::Var variance, std::span<const double> prior_mean);

}  // namespace relicd
