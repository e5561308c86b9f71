#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relicd/data.hpp"
#include "relicd/diagnostics.hpp"
#include "relicd/numerics.hpp"

namespace relicd {

// A diagnosis model: student posteriors, exercise factors and (for NCD) the
// interaction MLP, all held in one ParameterStore.
struct Model {
  DiagnosticConfig diagnostic;
  std::size_t students = 0;
  std::size_t concepts = 0;
  std::size_t dim = 0;
  std::vector<std::vector<std::uint32_t>> q_rows;
  Matrix q_dense;  // exercises x concepts, 0/1
  ParameterStore store;

  std::size_t exercises() const { return q_rows.size(); }
  std::span<const double> q_row(std::size_t exercise) const { return q_dense.row(exercise); }

  // Xavier-initialized model: W_mu and W_sigma are students x dim.
  static Model create(const DiagnosticConfig& diagnostic, std::size_t students, std::size_t concepts,
                      std::vector<std::vector<std::uint32_t>> q_rows, Rng& rng);

  // Re-derives q_dense from q_rows.
  void rebuild_q_dense();

  // sigmoid(mu), the deterministic mastery estimate.
  std::vector<double> mastery(std::size_t student) const;
  std::vector<double> variance(std::size_t student) const;

  // Deterministic prediction with theta = sigmoid(mu).
  double predict(std::size_t student, std::size_t exercise) const;
  std::vector<double> predict(std::span<const Interaction> all, std::span<const std::size_t> indices) const;
};

}  // namespace relicd
