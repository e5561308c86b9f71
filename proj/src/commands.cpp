#include "relicd/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "relicd/errors.hpp"

namespace relicd {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string optional_fixed(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : std::string();
}

// The value a reader of a 6-decimal CSV sees.
double round_trip6(double p) { return std::strtod(format_fixed(p, 6).c_str(), nullptr); }

std::string sanitize_for_filename(std::string_view id) {
  std::string s(id);
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  const auto logs = filter_students(load_logs(cfg.logs), cfg.min_logs);
  if (logs.empty()) {
    throw ValidationError("no student has at least " + std::to_string(cfg.min_logs) + " logs in " + cfg.logs.string());
  }
  const auto q = load_qmatrix(cfg.qmatrix);
  PreparedData data;
  data.dataset = Dataset::build(logs, q);
  data.split = split_per_student(data.dataset, cfg.split);
  return data;
}

PreparedData prepare_data(const Checkpoint& ckpt) {
  auto data = prepare_data(RunConfig::from_pairs(ckpt.config));
  const auto& ds = data.dataset;
  if (ds.students.ids() != ckpt.student_ids || ds.exercises.ids() != ckpt.exercise_ids ||
      ds.concept_ids != ckpt.concept_ids) {
    throw ValidationError("data files no longer match the checkpoint's student/exercise/concept ids");
  }
  return data;
}

std::vector<std::uint32_t> count_interactions(const Dataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t k = dataset.concept_count();
  std::vector<std::uint32_t> counts(dataset.student_count() * k, 0);
  for (auto i : indices) {
    const auto& it = dataset.interactions[i];
    for (auto c : dataset.q_rows[it.exercise]) ++counts[it.student * k + c];
  }
  return counts;
}

Checkpoint make_checkpoint(const RunConfig& cfg, const PreparedData& data, TrainResult result) {
  Checkpoint c;
  c.config = cfg.to_pairs();
  c.model = std::move(result.model);
  c.prior = std::move(result.prior);
  c.tracker = std::move(result.tracker);
  c.student_ids = data.dataset.students.ids();
  c.exercise_ids = data.dataset.exercises.ids();
  c.concept_ids = data.dataset.concept_ids;
  c.train_counts = count_interactions(data.dataset, data.split.train);
  c.best_phase = result.best_phase;
  c.best_epoch = result.best_epoch;
  c.validation = result.validation;
  return c;
}

void write_train_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,phase,l_pred,l_kl,l_rl,total,val_acc,val_auc,val_ece\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.phase << ',' << format_fixed(e.loss.pred, 10) << ',' << format_fixed(e.loss.kl, 10)
        << ',' << format_fixed(e.loss.rl, 10) << ',' << format_fixed(e.loss.total, 10) << ','
        << optional_fixed(e.val_acc, 6) << ',' << optional_fixed(e.val_auc, 6) << ',' << optional_fixed(e.val_ece, 6)
        << '\n';
  }
}

TrainArtifacts run_training(const RunConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const auto data = prepare_data(cfg);
  if (progress) {
    *progress << "data: " << data.dataset.student_count() << " students, " << data.dataset.exercise_count()
              << " exercises, " << data.dataset.concept_count() << " concepts, " << data.dataset.interactions.size()
              << " interactions (train " << data.split.train.size() << ", val " << data.split.validation.size()
              << ", test " << data.split.test.size() << ")\n";
  }
  TrainObserver observer;
  if (progress) {
    observer.on_epoch = [progress](const EpochLog& e) {
      *progress << "phase " << e.phase << " epoch " << e.epoch << ": loss " << format_fixed(e.loss.total, 6)
                << " (pred " << format_fixed(e.loss.pred, 6) << ", kl " << format_fixed(e.loss.kl, 4) << ", rl "
                << format_fixed(e.loss.rl, 6) << ")  val acc " << optional_fixed(e.val_acc, 4) << " auc "
                << optional_fixed(e.val_auc, 4) << " ece " << optional_fixed(e.val_ece, 4) << '\n';
    };
  }
  auto result = train(data.dataset, data.split, cfg.diagnostic, cfg.train, &observer);
  const auto log = result.log;

  TrainArtifacts art;
  art.checkpoint = make_checkpoint(cfg, data, std::move(result));
  fs::create_directories(cfg.output_dir);
  art.checkpoint_path = cfg.output_dir / "checkpoint.json";
  art.log_path = cfg.output_dir / "train_log.csv";
  art.config_path = cfg.output_dir / "resolved_config.txt";
  save_checkpoint(art.checkpoint, art.checkpoint_path);
  {
    auto out = open_output(art.log_path);
    write_train_log(out, log);
  }
  {
    auto out = open_output(art.config_path);
    out << render_config(cfg);
  }
  return art;
}

TrainArtifacts cmd_train(const fs::path& config_path, std::ostream& out) {
  const auto cfg = load_config(config_path);
  auto art = run_training(cfg, &out);
  out << "checkpoint: " << art.checkpoint_path.string() << '\n';
  out << "train log: " << art.log_path.string() << '\n';
  if (art.checkpoint.best_phase > 0) {
    out << "best: phase " << art.checkpoint.best_phase << " epoch " << art.checkpoint.best_epoch;
    if (art.checkpoint.validation) out << ", val auc " << format_fixed(art.checkpoint.validation->auc, 6);
    out << '\n';
  }
  return art;
}

SplitName parse_split_name(std::string_view s) {
  if (s == "train") return SplitName::Train;
  if (s == "val" || s == "validation") return SplitName::Validation;
  if (s == "test") return SplitName::Test;
  throw ValidationError("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "val";
    case SplitName::Test: return "test";
  }
  return "?";
}

std::span<const std::size_t> select(const Split& split, SplitName name) {
  switch (name) {
    case SplitName::Train: return split.train;
    case SplitName::Validation: return split.validation;
    case SplitName::Test: return split.test;
  }
  return {};
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const PreparedData& data, SplitName split, std::size_t bins) {
  const auto indices = select(data.split, split);
  if (indices.empty()) throw ValidationError("split '" + std::string(to_string(split)) + "' is empty");
  const auto probs = ckpt.model.predict(data.dataset.interactions, indices);
  EvalReport r;
  r.count = indices.size();
  r.pairs.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    r.pairs.push_back({round_trip6(probs[k]), data.dataset.interactions[indices[k]].score});
  }
  r.acc = accuracy(r.pairs);
  r.rmse = rmse(r.pairs);
  try {
    r.auc = auc(r.pairs);
  } catch (const std::invalid_argument&) {
    r.auc.reset();
  }
  r.calibration = calibration(r.pairs, bins);
  return r;
}

void write_predictions_csv(std::ostream& out, const Checkpoint& ckpt, const PreparedData& data, SplitName split,
                           const EvalReport& report) {
  const auto indices = select(data.split, split);
  out << "student_id,exercise_id,label,prob\n";
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& it = data.dataset.interactions[indices[k]];
    out << ckpt.student_ids[it.student] << ',' << ckpt.exercise_ids[it.exercise] << ',' << int(it.score) << ','
        << format_fixed(report.pairs[k].prob, 6) << '\n';
  }
}

void print_eval_report(std::ostream& out, const EvalReport& r) {
  out << "interactions: " << r.count << '\n';
  out << "acc: " << format_fixed(r.acc, 12) << '\n';
  out << "rmse: " << format_fixed(r.rmse, 12) << '\n';
  out << "auc: " << (r.auc ? format_fixed(*r.auc, 12) : std::string("undefined (single-class split)")) << '\n';
  out << "ece: " << format_fixed(r.calibration.ece, 12) << '\n';
  out << "mce: " << format_fixed(r.calibration.mce, 12) << '\n';
}

EvalReport cmd_eval(const fs::path& checkpoint, SplitName split, const std::optional<fs::path>& csv_out,
                    std::ostream& out) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto data = prepare_data(ckpt);
  const auto bins = RunConfig::from_pairs(ckpt.config).train.bins;
  auto report = evaluate_checkpoint(ckpt, data, split, bins);
  const auto path =
      csv_out.value_or(checkpoint.parent_path() / ("predictions_" + std::string(to_string(split)) + ".csv"));
  {
    auto f = open_output(path);
    write_predictions_csv(f, ckpt, data, split, report);
  }
  out << "split: " << to_string(split) << '\n';
  print_eval_report(out, report);
  out << "predictions: " << path.string() << '\n';
  return report;
}

DiagnosisReport diagnose(const Checkpoint& ckpt, std::string_view student_id) {
  const auto it = std::find(ckpt.student_ids.begin(), ckpt.student_ids.end(), student_id);
  if (it == ckpt.student_ids.end()) {
    throw ValidationError("unknown student id '" + std::string(student_id) + "'");
  }
  const auto s = static_cast<std::size_t>(it - ckpt.student_ids.begin());
  const auto mastery = ckpt.model.mastery(s);
  const auto variance = ckpt.model.variance(s);
  const bool scalar = ckpt.model.diagnostic.variant == Variant::Irt;

  DiagnosisReport report;
  report.student_id = std::string(student_id);
  for (std::size_t k = 0; k < ckpt.concept_ids.size(); ++k) {
    const std::size_t dim = scalar ? 0 : k;
    ConceptDiagnosis c;
    c.concept_index = k;
    c.concept_id = ckpt.concept_ids[k];
    c.mastery = mastery[dim];
    c.sigma = std::sqrt(variance[dim]);
    c.interactions = ckpt.train_count(s, k);
    if (ckpt.tracker.cells_per_student() > 0) c.tracker_o = ckpt.tracker.frequency(s, scalar ? 0 : k);
    report.concepts.push_back(std::move(c));
  }
  std::stable_sort(report.concepts.begin(), report.concepts.end(),
                   [](const ConceptDiagnosis& a, const ConceptDiagnosis& b) { return a.sigma < b.sigma; });
  for (std::size_t r = 0; r < report.concepts.size(); ++r) report.concepts[r].rank = r + 1;
  return report;
}

void write_diagnosis_csv(std::ostream& out, const DiagnosisReport& report) {
  out << "student_id,concept_id,rank,mastery,sigma,interactions,tracker_o\n";
  for (const auto& c : report.concepts) {
    out << report.student_id << ',' << c.concept_id << ',' << c.rank << ',' << format_fixed(c.mastery, 6) << ','
        << format_fixed(c.sigma, 6) << ',' << c.interactions << ',' << optional_fixed(c.tracker_o, 6) << '\n';
  }
}

void print_diagnosis(std::ostream& out, const DiagnosisReport& report) {
  out << "student " << report.student_id << '\n';
  out << "mastery = sigmoid(mu), the deterministic posterior-mean estimate; sigma = posterior std. deviation\n";
  out << "rank  concept  mastery   sigma     interactions  tracker_o\n";
  for (const auto& c : report.concepts) {
    out << c.rank << "  " << c.concept_id << "  " << format_fixed(c.mastery, 6) << "  " << format_fixed(c.sigma, 6)
        << "  " << c.interactions << "  " << (c.tracker_o ? format_fixed(*c.tracker_o, 6) : std::string("-"))
        << '\n';
  }
}

DiagnosisReport cmd_diagnose(const fs::path& checkpoint, std::string_view student_id,
                             const std::optional<fs::path>& csv_out, std::ostream& out) {
  const auto ckpt = load_checkpoint(checkpoint);
  auto report = diagnose(ckpt, student_id);
  const auto path =
      csv_out.value_or(checkpoint.parent_path() / ("diagnosis_" + sanitize_for_filename(student_id) + ".csv"));
  {
    auto f = open_output(path);
    write_diagnosis_csv(f, report);
  }
  print_diagnosis(out, report);
  out << "csv: " << path.string() << '\n';
  return report;
}

void write_ability_csv(std::ostream& out, const Checkpoint& ckpt) {
  const bool scalar = ckpt.model.diagnostic.variant == Variant::Irt;
  out << "student_id,concept_id,mastery,sigma,interacted\n";
  for (std::size_t s = 0; s < ckpt.student_ids.size(); ++s) {
    const auto mastery = ckpt.model.mastery(s);
    const auto variance = ckpt.model.variance(s);
    for (std::size_t k = 0; k < ckpt.concept_ids.size(); ++k) {
      const std::size_t dim = scalar ? 0 : k;
      out << ckpt.student_ids[s] << ',' << ckpt.concept_ids[k] << ',' << format_fixed(mastery[dim], 6) << ','
          << format_fixed(std::sqrt(variance[dim]), 6) << ',' << (ckpt.train_count(s, k) > 0 ? 1 : 0) << '\n';
    }
  }
}

fs::path cmd_export_ability(const fs::path& checkpoint, const std::optional<fs::path>& csv_out, std::ostream& out) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto path = csv_out.value_or(checkpoint.parent_path() / "ability.csv");
  {
    auto f = open_output(path);
    write_ability_csv(f, ckpt);
  }
  out << "rows: " << ckpt.student_ids.size() * ckpt.concept_ids.size() << '\n';
  out << "csv: " << path.string() << '\n';
  return path;
}

fs::path cmd_export_reliability(const fs::path& checkpoint, SplitName split, std::size_t bins,
                                const std::optional<fs::path>& csv_out, std::ostream& out) {
  if (bins == 0) throw ValidationError("bins must be >= 1");
  const auto ckpt = load_checkpoint(checkpoint);
  const auto data = prepare_data(ckpt);
  const auto report = evaluate_checkpoint(ckpt, data, split, bins);
  const auto rows = reliability_rows(report.calibration);
  const auto path = csv_out.value_or(checkpoint.parent_path() /
                                     ("reliability_" + std::string(to_string(split)) + ".csv"));
  {
    auto f = open_output(path);
    write_reliability_csv(f, rows);
  }
  out << "split: " << to_string(split) << ", bins: " << bins << '\n';
  out << "ece: " << format_fixed(report.calibration.ece, 12) << '\n';
  out << "mce: " << format_fixed(report.calibration.mce, 12) << '\n';
  out << "csv: " << path.string() << '\n';
  return path;
}

}  // namespace relicd
