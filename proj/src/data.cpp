#include "relicd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "relicd/errors.hpp"

namespace relicd {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Reads rows of a headed CSV, checking the header and the column count.
// Calls fn(fields, line_number) for every non-blank data row.
template <class Fn>
void read_csv(std::istream& in, std::string_view source, const std::vector<std::string>& header, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!have_header) {
      if (split_csv_line(line) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw ValidationError(std::string(source) + ": line 1: expected header '" + expected + "'");
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(std::string(source) + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    fn(fields, line_no);
  }
  if (!have_header) {
    throw ValidationError(std::string(source) + ": missing header row");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

}  // namespace

std::size_t IdIndex::add(const std::string& id) {
  auto [it, inserted] = index_.try_emplace(id, ids_.size());
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<std::size_t> IdIndex::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<ResponseLog> parse_logs(std::istream& in, std::string_view source) {
  std::vector<ResponseLog> logs;
  read_csv(in, source, {"student_id", "exercise_id", "score"},
           [&](std::vector<std::string>& f, std::size_t line_no) {
             if (f[0].empty() || f[1].empty()) {
               throw ValidationError(std::string(source) + ": line " + std::to_string(line_no) +
                                     ": empty student or exercise id");
             }
             int score;
             if (f[2] == "1") {
               score = 1;
             } else if (f[2] == "0") {
               score = 0;
             } else {
               throw ValidationError(std::string(source) + ": line " + std::to_string(line_no) +
                                     ": score must be 0 or 1, got '" + f[2] + "'");
             }
             logs.push_back({std::move(f[0]), std::move(f[1]), score});
           });
  return logs;
}

std::vector<ResponseLog> load_logs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_logs(in, path.string());
}

QMatrix parse_qmatrix(std::istream& in, std::string_view source) {
  QMatrix q;
  IdIndex concepts;
  read_csv(in, source, {"exercise_id", "concept_id"}, [&](std::vector<std::string>& f, std::size_t line_no) {
    if (f[0].empty() || f[1].empty()) {
      throw ValidationError(std::string(source) + ": line " + std::to_string(line_no) +
                            ": empty exercise or concept id");
    }
    const auto c = static_cast<std::uint32_t>(concepts.add(f[1]));
    auto& row = q.exercise_concepts[f[0]];
    if (std::find(row.begin(), row.end(), c) == row.end()) row.push_back(c);
  });
  q.concept_ids = concepts.ids();
  for (auto& [_, row] : q.exercise_concepts) std::sort(row.begin(), row.end());
  return q;
}

QMatrix load_qmatrix(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_qmatrix(in, path.string());
}

std::vector<ResponseLog> filter_students(std::span<const ResponseLog> logs, std::size_t min_logs) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& log : logs) ++counts[log.student_id];
  std::vector<ResponseLog> kept;
  kept.reserve(logs.size());
  for (const auto& log : logs) {
    if (counts[log.student_id] >= min_logs) kept.push_back(log);
  }
  return kept;
}

Dataset Dataset::build(std::span<const ResponseLog> logs, const QMatrix& q) {
  Dataset ds;
  ds.concept_ids = q.concept_ids;
  ds.interactions.reserve(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    auto qit = q.exercise_concepts.find(log.exercise_id);
    if (qit == q.exercise_concepts.end() || qit->second.empty()) {
      throw ValidationError("log " + std::to_string(i + 1) + ": exercise '" + log.exercise_id +
                            "' has no Q-matrix entry");
    }
    const std::size_t before = ds.exercises.size();
    const auto e = static_cast<std::uint32_t>(ds.exercises.add(log.exercise_id));
    if (ds.exercises.size() != before) ds.q_rows.push_back(qit->second);
    const auto s = static_cast<std::uint32_t>(ds.students.add(log.student_id));
    ds.interactions.push_back({s, e, static_cast<std::uint8_t>(log.score)});
  }
  return ds;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && validation > 0.0 && test > 0.0)) {
    throw ValidationError("split fractions must all be positive");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
  if (n < 3) throw ValidationError("student has fewer than 3 records; cannot split");
  const double dn = static_cast<double>(n);
  std::size_t train = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(dn * spec.train)));
  std::size_t val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(dn * spec.validation)));
  // leave at least one test record, shrinking the larger of the other two
  while (train + val + 1 > n) {
    if (train >= val) {
      --train;
    } else {
      --val;
    }
  }
  return {train, val, n - train - val};
}

Split split_per_student(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::size_t>> by_student(dataset.student_count());
  for (std::size_t i = 0; i < dataset.interactions.size(); ++i) {
    by_student[dataset.interactions[i].student].push_back(i);
  }
  Rng rng(spec.seed);
  Split split;
  for (std::size_t s = 0; s < by_student.size(); ++s) {
    auto& records = by_student[s];
    if (records.size() < 3) {
      throw ValidationError("student '" + dataset.students.id(s) + "' has " + std::to_string(records.size()) +
                            " records; at least 3 are needed to split");
    }
    if (spec.shuffle) std::shuffle(records.begin(), records.end(), rng);
    const auto c = split_counts(records.size(), spec);
    split.train.insert(split.train.end(), records.begin(), records.begin() + c.train);
    split.validation.insert(split.validation.end(), records.begin() + c.train,
                            records.begin() + c.train + c.validation);
    split.test.insert(split.test.end(), records.begin() + c.train + c.validation, records.end());
  }
  return split;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start == 1 && !batches.empty()) {
      batches.back().push_back(order[start]);
    } else {
      batches.emplace_back(order.begin() + start, order.begin() + end);
    }
  }
  return batches;
}

}  // namespace relicd
