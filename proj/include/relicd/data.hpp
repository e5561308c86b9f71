#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relicd/numerics.hpp"

namespace relicd {

struct ResponseLog {
  std::string student_id;
  std::string exercise_id;
  int score = 0;  // 1 correct, 0 incorrect

  bool operator==(const ResponseLog&) const = default;
};

// Expert exercise -> concept incidence, keyed by the raw exercise ids of the
// Q-matrix file. Concept ids get dense indices in first-appearance order.
struct QMatrix {
  std::vector<std::string> concept_ids;
  std::unordered_map<std::string, std::vector<std::uint32_t>> exercise_concepts;

  std::size_t concept_count() const { return concept_ids.size(); }
  std::size_t exercise_count() const { return exercise_concepts.size(); }
};

// Bijection between opaque string ids and [0, n).
class IdIndex {
 public:
  std::size_t add(const std::string& id);
  std::optional<std::size_t> find(std::string_view id) const;
  const std::string& id(std::size_t index) const { return ids_[index]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Interaction {
  std::uint32_t student = 0;
  std::uint32_t exercise = 0;
  std::uint8_t score = 0;
};

// Indexed, immutable view of the retained logs. q_rows[j] lists the concept
// indices covered by exercise j (sorted, unique, nonempty).
struct Dataset {
  IdIndex students;
  IdIndex exercises;
  std::vector<std::string> concept_ids;
  std::vector<std::vector<std::uint32_t>> q_rows;
  std::vector<Interaction> interactions;

  std::size_t student_count() const { return students.size(); }
  std::size_t exercise_count() const { return exercises.size(); }
  std::size_t concept_count() const { return concept_ids.size(); }

  // Students and exercises are indexed in first-appearance order of `logs`.
  // Throws ValidationError if a log references an exercise missing from `q`.
  static Dataset build(std::span<const ResponseLog> logs, const QMatrix& q);
};

std::vector<ResponseLog> parse_logs(std::istream& in, std::string_view source = "<stream>");
std::vector<ResponseLog> load_logs(const std::filesystem::path& path);

QMatrix parse_qmatrix(std::istream& in, std::string_view source = "<stream>");
QMatrix load_qmatrix(const std::filesystem::path& path);

// Keeps exactly the logs of students with at least min_logs logs, in order.
std::vector<ResponseLog> filter_students(std::span<const ResponseLog> logs, std::size_t min_logs = 15);

struct SplitSpec {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
  // false keeps each student's records in file order.
  bool shuffle = true;

  void validate() const;
};

// Interaction indices (into Dataset::interactions) for each split.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Per-student partition: train = max(1, floor(n * train)), validation =
// max(1, floor(n * validation)), test = the rest. When test would be empty the
// larger of train/validation gives up records. Every student needs >= 3.
Split split_per_student(const Dataset& dataset, const SplitSpec& spec);

// Per-split sizes for a student with n records.
struct SplitCounts {
  std::size_t train, validation, test;
};
SplitCounts split_counts(std::size_t n, const SplitSpec& spec);

// Seeded shuffle chunked into batch_size pieces. A trailing chunk of size 1
// is merged into the previous chunk.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices,
                                                   std::size_t batch_size, Rng& rng);

}  // namespace relicd
