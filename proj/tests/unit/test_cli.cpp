#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "relicd/checkpoint.hpp"
#include "relicd/commands.hpp"
#include "relicd/config.hpp"
#include "relicd/errors.hpp"
#include "synthetic.hpp"

using namespace relicd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("relicd_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.push_back("");
    rows.push_back(f);
  }
  return rows;
}

std::string header_of(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// The bundled fixture copied to a scratch directory and trained once.
struct ToyRun {
  fs::path dir;
  fs::path config;
  TrainArtifacts artifacts;
  PreparedData data;
};

const ToyRun& toy_run() {
  static const ToyRun run = [] {
    ToyRun r;
    r.dir = scratch_dir("toy");
    for (const char* f : {"toy.cfg", "toy_logs.csv", "toy_qmatrix.csv"}) {
      fs::copy_file(fs::path(RELICD_FIXTURE_DIR) / f, r.dir / f);
    }
    r.config = r.dir / "toy.cfg";
    std::ostringstream sink;
    r.artifacts = cmd_train(r.config, sink);
    r.data = prepare_data(r.artifacts.checkpoint);
    return r;
  }();
  return run;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + RELICD_CLI + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train writes checkpoint, log and resolved config") {
    const auto& run = toy_run();
    CHECK(fs::exists(run.artifacts.checkpoint_path));
    CHECK(header_of(run.artifacts.log_path) == "epoch,phase,l_pred,l_kl,l_rl,total,val_acc,val_auc,val_ece");
    CHECK(read_rows(run.artifacts.log_path).size() >= 2);
    const auto resolved = load_config(run.artifacts.config_path);
    CHECK(resolved.train.seed == 1);
    CHECK(resolved.diagnostic.hidden1 == 32);
  }

  TEST_CASE("eval beats the majority rate on the training split") {
    const auto& run = toy_run();
    std::ostringstream out;
    const auto csv = run.dir / "pred_train.csv";
    const auto report = cmd_eval(run.artifacts.checkpoint_path, SplitName::Train, csv, out);
    const auto& idx = run.data.split.train;
    double pos = 0;
    for (auto i : idx) pos += run.data.dataset.interactions[i].score;
    const double majority = std::max(pos, idx.size() - pos) / idx.size();
    CHECK(report.acc > majority);
    CHECK(header_of(csv) == "student_id,exercise_id,label,prob");
    const auto rows = read_rows(csv);
    CHECK(rows.size() == idx.size());
    for (const auto& r : rows) CHECK(r[3].size() == 8);  // 0.dddddd
    CHECK(out.str().find("ece: ") != std::string::npos);

    for (auto split : {SplitName::Validation, SplitName::Test}) {
      const auto p = run.dir / "pred.csv";
      const auto rep = cmd_eval(run.artifacts.checkpoint_path, split, p, out);
      CHECK(read_rows(p).size() == select(run.data.split, split).size());
      CHECK(rep.count == select(run.data.split, split).size());
    }
  }

  TEST_CASE("identical inputs give byte-identical outputs") {
    const auto& run = toy_run();
    const auto dir = scratch_dir("rerun");
    for (const char* f : {"toy.cfg", "toy_logs.csv", "toy_qmatrix.csv"}) {
      fs::copy_file(fs::path(RELICD_FIXTURE_DIR) / f, dir / f);
    }
    std::ostringstream sink;
    const auto first = cmd_train(dir / "toy.cfg", sink);
    const auto ckpt = slurp(first.checkpoint_path);
    const auto log = slurp(first.log_path);
    cmd_eval(first.checkpoint_path, SplitName::Test, dir / "a.csv", sink);
    cmd_train(dir / "toy.cfg", sink);
    CHECK(slurp(first.checkpoint_path) == ckpt);
    CHECK(slurp(first.log_path) == log);
    cmd_eval(first.checkpoint_path, SplitName::Test, dir / "b.csv", sink);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(first.checkpoint.validation->auc == run.artifacts.checkpoint.validation->auc);
    fs::remove_all(dir);
  }

  TEST_CASE("untrained all-half checkpoint scores RMSE 0.5") {
    const auto& run = toy_run();
    auto ckpt = load_checkpoint(run.artifacts.checkpoint_path);
    for (auto& p : ckpt.model.store.params()) {
      if (p.name != kMeanParam && p.name != kLogVarParam) std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
    }
    const auto path = run.dir / "flat.json";
    save_checkpoint(ckpt, path);
    std::ostringstream out;
    const auto rep = cmd_eval(path, SplitName::Test, run.dir / "flat.csv", out);
    CHECK(rep.rmse == doctest::Approx(0.5).epsilon(1e-12));
    for (const auto& r : read_rows(run.dir / "flat.csv")) CHECK(r[3] == "0.500000");
  }

  TEST_CASE("diagnose") {
    const auto& run = toy_run();
    const auto& ckpt = run.artifacts.checkpoint;
    std::ostringstream out;
    const auto csv = run.dir / "diag.csv";
    const auto rep = cmd_diagnose(run.artifacts.checkpoint_path, ckpt.student_ids[3], csv, out);
    REQUIRE(rep.concepts.size() == ckpt.concept_ids.size());
    std::set<std::size_t> ranks;
    for (std::size_t i = 0; i < rep.concepts.size(); ++i) {
      const auto& c = rep.concepts[i];
      CHECK((c.mastery > 0.0 && c.mastery < 1.0));
      CHECK(c.sigma > 0.0);
      CHECK(c.rank == i + 1);
      ranks.insert(c.rank);
      if (i > 0) {
        const auto& prev = rep.concepts[i - 1];
        CHECK((prev.sigma < c.sigma || (prev.sigma == c.sigma && prev.concept_index < c.concept_index)));
      }
    }
    CHECK(ranks.size() == rep.concepts.size());
    CHECK(header_of(csv) == "student_id,concept_id,rank,mastery,sigma,interactions,tracker_o");
    CHECK(read_rows(csv).size() == ckpt.concept_ids.size());
    CHECK(out.str().find("sigmoid(mu)") != std::string::npos);

    const auto msg = [&] {
      try {
        diagnose(ckpt, "nobody");
      } catch (const ValidationError& e) {
        return std::string(e.what());
      }
      return std::string();
    }();
    CHECK(msg.find("nobody") != std::string::npos);
  }

  TEST_CASE("diagnose ranks a well-observed concept above an unseen one") {
    // the synthetic MIRT run used for the recovery check
    testing::SyntheticSpec spec;
    spec.seed = 7;
    const auto syn = testing::make_mirt_data(spec);
    const auto dir = scratch_dir("synthetic");
    {
      std::ofstream logs(dir / "logs.csv");
      logs << "student_id,exercise_id,score\n";
      for (const auto& l : syn.logs) logs << l.student_id << ',' << l.exercise_id << ',' << l.score << '\n';
      std::ofstream q(dir / "q.csv");
      q << "exercise_id,concept_id\n";
      for (std::size_t j = 0; j < spec.exercises; ++j) {
        for (auto c : syn.q.exercise_concepts.at("x" + std::to_string(j))) q << 'x' << j << ',' << syn.q.concept_ids[c] << '\n';
      }
    }
    auto cfg = RunConfig::from_pairs({{"logs", "logs.csv"}, {"qmatrix", "q.csv"}, {"output_dir", "out"},
                                      {"variant", "mirt"}, {"seed", "7"}},
                                     dir);
    const auto art = run_training(cfg);
    const auto& ckpt = art.checkpoint;
    std::size_t pairs = 0, ordered = 0;
    for (const auto& sid : ckpt.student_ids) {
      const auto rep = diagnose(ckpt, sid);
      for (const auto& busy : rep.concepts) {
        if (!busy.tracker_o) continue;
        const auto s = std::find(ckpt.student_ids.begin(), ckpt.student_ids.end(), sid) - ckpt.student_ids.begin();
        if (ckpt.tracker.total(s, busy.concept_index) < 40) continue;
        for (const auto& idle : rep.concepts) {
          if (ckpt.tracker.total(s, idle.concept_index) != 0) continue;
          ++pairs;
          if (busy.sigma < idle.sigma) ++ordered;
        }
      }
    }
    MESSAGE("40-vs-0 tracker cells: " << ordered << " of " << pairs << " have the smaller sigma on the busy concept");
    REQUIRE(pairs > 0);
    // per-student variances are noisy; a handful of inversions are tolerated
    CHECK(static_cast<double>(ordered) / pairs >= 0.95);
    fs::remove_all(dir);
  }

  TEST_CASE("export ability") {
    const auto& run = toy_run();
    const auto& ckpt = run.artifacts.checkpoint;
    std::ostringstream out;
    const auto path = cmd_export_ability(run.artifacts.checkpoint_path, std::nullopt, out);
    CHECK(path == run.artifacts.checkpoint_path.parent_path() / "ability.csv");
    CHECK(header_of(path) == "student_id,concept_id,mastery,sigma,interacted");
    const auto rows = read_rows(path);
    CHECK(rows.size() == 160);

    // recount from the raw training interactions
    std::set<std::pair<std::string, std::string>> seen;
    const auto& ds = run.data.dataset;
    for (auto i : run.data.split.train) {
      const auto& it = ds.interactions[i];
      for (auto c : ds.q_rows[it.exercise]) seen.insert({ds.students.id(it.student), ds.concept_ids[c]});
    }
    for (const auto& r : rows) {
      const double m = std::stod(r[2]);
      CHECK((m > 0.0 && m < 1.0));
      CHECK(r[4] == (seen.count({r[0], r[1]}) ? "1" : "0"));
    }
    (void)ckpt;
  }

  TEST_CASE("export reliability") {
    const auto& run = toy_run();
    std::ostringstream out;
    const auto ten = cmd_export_reliability(run.artifacts.checkpoint_path, SplitName::Test, 10, run.dir / "r10.csv", out);
    const auto rows = read_rows(ten);
    CHECK(rows.size() == 10);
    const auto eval = cmd_eval(run.artifacts.checkpoint_path, SplitName::Test, run.dir / "p.csv", out);
    double ece = 0, total = 0;
    for (const auto& r : rows) total += std::stod(r[3]);
    for (const auto& r : rows) {
      if (r[3] == "0") continue;
      ece += std::stod(r[3]) / total * std::stod(r[6]);
    }
    CHECK(std::abs(ece - eval.calibration.ece) < 1e-9);

    const auto one = cmd_export_reliability(run.artifacts.checkpoint_path, SplitName::Test, 1, run.dir / "r1.csv", out);
    const auto single = read_rows(one);
    REQUIRE(single.size() == 1);
    double mean = 0;
    for (const auto& p : eval.pairs) mean += p.prob;
    mean /= eval.pairs.size();
    CHECK(std::abs(std::stod(single[0][6]) - std::abs(eval.acc - mean)) < 1e-9);
  }

  TEST_CASE("binary exit codes") {
    const auto& run = toy_run();
    const auto ckpt = run.artifacts.checkpoint_path.string();
    CHECK(run_cli("eval --checkpoint \"" + ckpt + "\" --split test --out \"" + (run.dir / "x.csv").string() + "\"") == 0);
    CHECK(run_cli("diagnose --checkpoint \"" + ckpt + "\" --student nobody") == 1);
    CHECK(run_cli("eval --checkpoint \"" + ckpt + "\" --split sideways") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("eval --checkpoint \"" + (run.dir / "missing.json").string() + "\"") == 1);

    const auto bad = run.dir / "bad.cfg";
    std::ofstream(bad) << slurp(run.config) << "beta = -1\n";
    CHECK(run_cli("train --config \"" + bad.string() + "\"") == 1);
  }
}
