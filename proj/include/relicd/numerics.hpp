#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relicd {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a stream name, so
// that e.g. the split and the dropout masks can be perturbed independently.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

// Dense row-major matrix of doubles. Vectors are stored as 1-row or 1-column
// matrices depending on their role.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }

  bool operator==(const Matrix&) const = default;
};

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws ValidationError on out-of-range values.
  void validate() const;
};

enum class ParamId : std::size_t {};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

// Named trainable tensors plus their gradient accumulators and Adam state.
// Every buffer of a parameter has the parameter's shape.
class ParameterStore {
 public:
  ParamId add(std::string name, Matrix init);

  ParamId id(std::string_view name) const;
  std::optional<ParamId> find(std::string_view name) const;

  Parameter& operator[](ParamId id) { return params_[static_cast<std::size_t>(id)]; }
  const Parameter& operator[](ParamId id) const { return params_[static_cast<std::size_t>(id)]; }

  std::span<Parameter> params() { return params_; }
  std::span<const Parameter> params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::uint64_t step() const { return step_; }

  void zero_grad();
  // Clears both Adam moments and the step counter.
  void reset_moments();

 private:
  friend void adam_step(ParameterStore& store, const AdamConfig& cfg);
  std::vector<Parameter> params_;
  std::uint64_t step_ = 0;
};

// Bias-corrected Adam update of every parameter in the store, followed by
// zeroing of the gradient accumulators. Throws NumericsError (naming the
// parameter) without touching anything if any gradient entry is non-finite.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

// Uniform Xavier/Glorot draw on [-b, b], b = sqrt(6 / (fan_in + fan_out)).
// The result has fan_out rows and fan_in columns (y = W x layout).
Matrix xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

double xavier_bound(std::size_t fan_in, std::size_t fan_out);

// 1 / (1 + exp(-x)) without overflow for large |x|.
double stable_sigmoid(double x);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Objective evaluated at the store's current values. It must accumulate the
// analytic gradient into the store's grad buffers; grad_check zeroes them
// before each call.
using Objective = std::function<double(ParameterStore&)>;

// Compares analytic gradients against central differences (f(w+h) - f(w-h)) / 2h
// for every entry of every parameter. Relative error is
// |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const Objective& f, ParameterStore& store, double h);

}  // namespace relicd
