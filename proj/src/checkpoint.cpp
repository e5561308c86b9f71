#include "relicd/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "relicd/errors.hpp"

namespace relicd {

using nlohmann::json;

namespace {

json metrics_json(const std::optional<MetricReport>& m) {
  if (!m) return nullptr;
  return json{{"acc", m->acc}, {"rmse", m->rmse}, {"auc", m->auc}, {"ece", m->ece}, {"mce", m->mce}};
}

std::optional<MetricReport> metrics_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  MetricReport m;
  m.acc = j.at("acc").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.auc = j.at("auc").get<double>();
  m.ece = j.at("ece").get<double>();
  m.mce = j.at("mce").get<double>();
  return m;
}

Checkpoint from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw ValidationError("checkpoint format_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  }
  Checkpoint c;
  c.config = j.at("config").get<std::map<std::string, std::string>>();
  c.student_ids = j.at("student_ids").get<std::vector<std::string>>();
  c.exercise_ids = j.at("exercise_ids").get<std::vector<std::string>>();
  c.concept_ids = j.at("concept_ids").get<std::vector<std::string>>();
  auto q_rows = j.at("q_rows").get<std::vector<std::vector<std::uint32_t>>>();
  if (q_rows.size() != c.exercise_ids.size()) throw ValidationError("checkpoint: q_rows size differs from exercise_ids");
  for (const auto& row : q_rows) {
    for (auto k : row) {
      if (k >= c.concept_ids.size()) throw ValidationError("checkpoint: q_rows references an unknown concept");
    }
  }

  const auto& d = j.at("diagnostic");
  DiagnosticConfig diag;
  diag.variant = parse_variant(d.at("variant").get<std::string>());
  diag.irt_scale = d.at("irt_scale").get<double>();
  diag.hidden1 = d.at("hidden1").get<std::size_t>();
  diag.hidden2 = d.at("hidden2").get<std::size_t>();

  // A freshly built model fixes the expected parameter names and shapes.
  Rng unused(0);
  c.model = Model::create(diag, c.student_ids.size(), c.concept_ids.size(), std::move(q_rows), unused);
  const auto& params = j.at("params");
  if (params.size() != c.model.store.size()) {
    throw ValidationError("checkpoint: expected " + std::to_string(c.model.store.size()) + " parameters, found " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = c.model.store.params()[i];
    const auto& jp = params[i];
    const auto name = jp.at("name").get<std::string>();
    const auto rows = jp.at("rows").get<std::size_t>();
    const auto cols = jp.at("cols").get<std::size_t>();
    if (name != p.name || rows != p.value.rows || cols != p.value.cols) {
      throw ValidationError("checkpoint: parameter " + std::to_string(i) + " is " + name + " " + std::to_string(rows) +
                            "x" + std::to_string(cols) + ", expected " + p.name + " " +
                            std::to_string(p.value.rows) + "x" + std::to_string(p.value.cols));
    }
    auto data = jp.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw ValidationError("checkpoint: parameter " + name + " has wrong data length");
    p.value.data = std::move(data);
  }

  c.prior.mean = j.at("mu_mean").get<std::vector<double>>();
  if (c.prior.mean.size() != c.model.dim) throw ValidationError("checkpoint: mu_mean has wrong length");

  const auto& t = j.at("tracker");
  const auto cells = t.at("cells").get<std::size_t>();
  auto correct = t.at("correct").get<std::vector<std::uint64_t>>();
  auto total = t.at("total").get<std::vector<std::uint64_t>>();
  const auto n = c.student_ids.size();
  if (correct.size() != n * cells || total.size() != n * cells) {
    throw ValidationError("checkpoint: tracker counts have wrong length");
  }
  c.tracker = CorrectnessTracker::from_counts(n, cells, std::move(correct), std::move(total));

  c.train_counts = j.at("train_counts").get<std::vector<std::uint32_t>>();
  if (c.train_counts.size() != n * c.concept_ids.size()) {
    throw ValidationError("checkpoint: train_counts has wrong length");
  }
  c.best_phase = j.at("best_phase").get<int>();
  c.best_epoch = j.at("best_epoch").get<std::size_t>();
  c.validation = metrics_from(j.at("validation"));
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  json params = json::array();
  for (const auto& p : c.model.store.params()) {
    params.push_back(json{{"name", p.name}, {"rows", p.value.rows}, {"cols", p.value.cols}, {"data", p.value.data}});
  }
  const auto& diag = c.model.diagnostic;
  json j{
      {"format_version", kCheckpointFormatVersion},
      {"config", c.config},
      {"diagnostic",
       {{"variant", std::string(to_string(diag.variant))},
        {"irt_scale", diag.irt_scale},
        {"hidden1", diag.hidden1},
        {"hidden2", diag.hidden2}}},
      {"student_ids", c.student_ids},
      {"exercise_ids", c.exercise_ids},
      {"concept_ids", c.concept_ids},
      {"q_rows", c.model.q_rows},
      {"params", std::move(params)},
      {"mu_mean", c.prior.mean},
      {"tracker",
       {{"cells", c.tracker.cells_per_student()},
        {"correct", c.tracker.correct_counts()},
        {"total", c.tracker.total_counts()}}},
      {"train_counts", c.train_counts},
      {"best_phase", c.best_phase},
      {"best_epoch", c.best_epoch},
      {"validation", metrics_json(c.validation)},
  };
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(ckpt);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace relicd
