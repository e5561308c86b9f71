#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relicd/latent.hpp"
#include "relicd/metrics.hpp"
#include "relicd/model.hpp"
#include "relicd/training.hpp"

namespace relicd {

inline constexpr int kCheckpointFormatVersion = 1;

// Everything needed to evaluate or inspect a trained model without retraining.
// Adam moments are not stored; a checkpoint is not a resume point.
struct Checkpoint {
  std::map<std::string, std::string> config;  // RunConfig::to_pairs() of the run
  Model model;
  PriorConsensus prior;
  CorrectnessTracker tracker;
  std::vector<std::string> student_ids;
  std::vector<std::string> exercise_ids;
  std::vector<std::string> concept_ids;
  // Training interactions per (student, concept), students x concepts row-major.
  std::vector<std::uint32_t> train_counts;
  int best_phase = 0;
  std::size_t best_epoch = 0;
  std::optional<MetricReport> validation;

  std::uint32_t train_count(std::size_t student, std::size_t concept_index) const {
    return train_counts[student * concept_ids.size() + concept_index];
  }
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws ValidationError on malformed input, wrong format_version or
// parameter shapes that do not match the declared model.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relicd
