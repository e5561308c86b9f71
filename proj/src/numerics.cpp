#include "relicd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relicd/errors.hpp"

namespace relicd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  return splitmix64(splitmix64(master) ^ fnv1a(stream));
}

ParamId ParameterStore::add(std::string name, Matrix init) {
  if (find(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  Parameter p;
  p.name = std::move(name);
  p.grad = Matrix(init.rows, init.cols);
  p.first_moment = Matrix(init.rows, init.cols);
  p.second_moment = Matrix(init.rows, init.cols);
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return static_cast<ParamId>(params_.size() - 1);
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<ParamId>(i);
  }
  return std::nullopt;
}

ParamId ParameterStore::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

void ParameterStore::reset_moments() {
  for (auto& p : params_) {
    std::fill(p.first_moment.data.begin(), p.first_moment.data.end(), 0.0);
    std::fill(p.second_moment.data.begin(), p.second_moment.data.end(), 0.0);
  }
  step_ = 0;
}

void AdamConfig::validate() const {
  std::ostringstream errs;
  if (!(learning_rate > 0.0)) errs << "learning_rate must be > 0; ";
  if (!(beta1 >= 0.0 && beta1 < 1.0)) errs << "beta1 must be in [0, 1); ";
  if (!(beta2 >= 0.0 && beta2 < 1.0)) errs << "beta2 must be in [0, 1); ";
  if (!(epsilon > 0.0)) errs << "epsilon must be > 0; ";
  if (!errs.str().empty()) throw ValidationError("invalid Adam config: " + errs.str());
}

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  for (const auto& p : store.params_) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad.data[i])) {
        throw NumericsError("non-finite gradient in parameter '" + p.name + "' at entry " +
                            std::to_string(i));
      }
    }
  }

  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  for (auto& p : store.params_) {
    double* w = p.value.data.data();
    double* g = p.grad.data.data();
    double* m = p.first_moment.data.data();
    double* v = p.second_moment.data.data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      g[i] = 0.0;
    }
  }
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("xavier_init: fan dimensions must be positive");
  }
  const double b = xavier_bound(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-b, b);
  Matrix m(fan_out, fan_in);
  for (auto& x : m.data) x = dist(rng);
  return m;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GradCheckResult grad_check(const Objective& f, ParameterStore& store, double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) {
    throw std::invalid_argument("grad_check: h must be in [1e-6, 1e-3]");
  }
  store.zero_grad();
  f(store);
  std::vector<Matrix> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store.params()) analytic.push_back(p.grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store.params()[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data[i];
      p.value.data[i] = saved + h;
      const double up = f(store);
      p.value.data[i] = saved - h;
      const double down = f(store);
      p.value.data[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(numeric)) {
        store.zero_grad();
        throw NumericsError("grad_check: non-finite finite difference in parameter '" + p.name +
                            "' at entry " + std::to_string(i));
      }
      const double a = analytic[pi].data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = rel;
        result.worst_parameter = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace relicd
