#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relicd/checkpoint.hpp"
#include "relicd/config.hpp"
#include "relicd/data.hpp"
#include "relicd/metrics.hpp"
#include "relicd/training.hpp"

namespace relicd {

struct PreparedData {
  Dataset dataset;
  Split split;
};

// Load logs and Q-matrix, drop sparse students, index and split.
PreparedData prepare_data(const RunConfig& cfg);

// Re-runs the data pipeline recorded in a checkpoint and checks that the
// resulting id maps are the ones the model was trained on.
PreparedData prepare_data(const Checkpoint& ckpt);

// Training interactions per (student, concept), students x concepts.
std::vector<std::uint32_t> count_interactions(const Dataset& dataset, std::span<const std::size_t> indices);

Checkpoint make_checkpoint(const RunConfig& cfg, const PreparedData& data, TrainResult result);

struct TrainArtifacts {
  Checkpoint checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
  std::filesystem::path config_path;
};

// Trains per cfg and writes checkpoint.json, train_log.csv and
// resolved_config.txt into cfg.output_dir. Progress lines go to `progress`.
TrainArtifacts run_training(const RunConfig& cfg, std::ostream* progress = nullptr);
TrainArtifacts cmd_train(const std::filesystem::path& config_path, std::ostream& out);

void write_train_log(std::ostream& out, std::span<const EpochLog> log);

enum class SplitName { Train, Validation, Test };
SplitName parse_split_name(std::string_view s);
std::string_view to_string(SplitName s);
std::span<const std::size_t> select(const Split& split, SplitName name);

struct EvalReport {
  std::size_t count = 0;
  double acc = 0.0;
  double rmse = 0.0;
  std::optional<double> auc;
  BinReport calibration;
  // Probabilities rounded to the 6 decimals written to the predictions CSV;
  // every metric above is computed from these.
  std::vector<ScoredPair> pairs;
};

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const PreparedData& data, SplitName split,
                               std::size_t bins);
void write_predictions_csv(std::ostream& out, const Checkpoint& ckpt, const PreparedData& data, SplitName split,
                           const EvalReport& report);
void print_eval_report(std::ostream& out, const EvalReport& report);

// Default output locations sit next to the checkpoint.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, SplitName split,
                    const std::optional<std::filesystem::path>& csv_out, std::ostream& out);

struct ConceptDiagnosis {
  std::size_t concept_index = 0;
  std::string concept_id;
  std::size_t rank = 0;  // 1 = most confident (smallest sigma)
  double mastery = 0.0;  // sigmoid(mu)
  double sigma = 0.0;
  std::uint32_t interactions = 0;  // training interactions covering the concept
  std::optional<double> tracker_o;
};

struct DiagnosisReport {
  std::string student_id;
  std::vector<ConceptDiagnosis> concepts;  // ordered by rank
};

// Throws ValidationError naming the id if the student is unknown.
DiagnosisReport diagnose(const Checkpoint& ckpt, std::string_view student_id);
void write_diagnosis_csv(std::ostream& out, const DiagnosisReport& report);
void print_diagnosis(std::ostream& out, const DiagnosisReport& report);
DiagnosisReport cmd_diagnose(const std::filesystem::path& checkpoint, std::string_view student_id,
                             const std::optional<std::filesystem::path>& csv_out, std::ostream& out);

void write_ability_csv(std::ostream& out, const Checkpoint& ckpt);
std::filesystem::path cmd_export_ability(const std::filesystem::path& checkpoint,
                                         const std::optional<std::filesystem::path>& csv_out, std::ostream& out);

std::filesystem::path cmd_export_reliability(const std::filesystem::path& checkpoint, SplitName split,
                                             std::size_t bins,
                                             const std::optional<std::filesystem::path>& csv_out, std::ostream& out);

}  // namespace relicd
