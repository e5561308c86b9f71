#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "relicd/numerics.hpp"
#include "relicd/tape.hpp"

namespace relicd {

enum class Variant { Irt, Mirt, Ncd };

std::string_view to_string(Variant v);
// Accepts "irt", "mirt", "ncd" (any case). Throws ValidationError otherwise.
Variant parse_variant(std::string_view s);

struct DiagnosticConfig {
  Variant variant = Variant::Ncd;
  double irt_scale = 1.702;  // the IRT constant D
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;

  bool operator==(const DiagnosticConfig&) const = default;
};

// Latent dimensionality: 1 for IRT, K otherwise.
std::size_t latent_dim(Variant v, std::size_t concept_count);

inline constexpr const char* kDifficultyParam = "W_diff";
inline constexpr const char* kDiscriminationParam = "W_disc";
inline constexpr const char* kNcdW1 = "ncd.W1";
inline constexpr const char* kNcdB1 = "ncd.b1";
inline constexpr const char* kNcdW2 = "ncd.W2";
inline constexpr const char* kNcdB2 = "ncd.b2";
inline constexpr const char* kNcdW3 = "ncd.W3";
inline constexpr const char* kNcdB3 = "ncd.b3";

struct ExerciseParams {
  std::vector<double> difficulty;  // each in (0,1)
  double discrimination = 1.0;     // in (0,1); fixed at 1 when the store has no W_disc (MIRT)
};

ExerciseParams exercise_params(std::size_t exercise, const ParameterStore& store);

// 1 / (1 + exp(-D * disc * (theta - diff)))
double predict_irt(double theta, double difficulty, double discrimination, double scale);

// sigmoid(sum_l q_l (theta_l - diff_l))
double predict_mirt(std::span<const double> theta, std::span<const double> difficulty,
                    std::span<const double> q_row);

// Weights are stored out x in; biases as 1 x out.
struct NcdLayers {
  Matrix w1, b1, w2, b2, w3, b3;
};

NcdLayers ncd_layers(const ParameterStore& store);

// Input q * (theta - diff) * disc through three affine+sigmoid layers.
double predict_ncd(std::span<const double> theta, std::span<const double> difficulty, double discrimination,
                   std::span<const double> q_row, const NcdLayers& mlp);

// max(0, w) on every NCD weight matrix; biases are left alone.
void clamp_ncd_weights(NcdLayers& mlp);
void clamp_ncd_weights(ParameterStore& store);

// Adds the diagnostic parameters (W_diff, W_disc unless MIRT, NCD MLP) to the
// store with Xavier-initialized weights and zero biases.
void add_diagnostic_params(ParameterStore& store, const DiagnosticConfig& cfg, std::size_t exercise_count,
                           std::size_t concept_count, Rng& rng);

// Correct-response probability for a (differentiable) ability vector theta.
Tape::Var predict_on_tape(Tape& tape, const ParameterStore& store, const DiagnosticConfig& cfg, Tape::Var theta,
                          std::size_t exercise, std::span<const double> q_row);

}  // namespace relicd
