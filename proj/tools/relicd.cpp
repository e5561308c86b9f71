#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relicd/commands.hpp"
#include "relicd/errors.hpp"

namespace fs = std::filesystem;

namespace {

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive diagnosis with per-concept confidence"};
  app.require_subcommand(1);

  std::string config, checkpoint, split = "test", student, out;
  std::size_t bins = 10;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config, "config file (key = value lines)")->required();

  auto* eval = app.add_subcommand("eval", "score a split and write per-interaction predictions");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--out", out, "predictions CSV path");

  auto* diag = app.add_subcommand("diagnose", "per-concept mastery and confidence for one student");
  diag->add_option("--checkpoint", checkpoint)->required();
  diag->add_option("--student", student)->required();
  diag->add_option("--out", out, "report CSV path");

  auto* ability = app.add_subcommand("export-ability", "mastery and sigma for every student and concept");
  ability->add_option("--checkpoint", checkpoint)->required();
  ability->add_option("--out", out, "CSV path");

  auto* rel = app.add_subcommand("export-reliability", "reliability-diagram table for a split");
  rel->add_option("--checkpoint", checkpoint)->required();
  rel->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  rel->add_option("--bins", bins)->check(CLI::PositiveNumber);
  rel->add_option("--out", out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      relicd::cmd_train(config, std::cout);
    } else if (*eval) {
      relicd::cmd_eval(checkpoint, relicd::parse_split_name(split), optional_path(out), std::cout);
    } else if (*diag) {
      relicd::cmd_diagnose(checkpoint, student, optional_path(out), std::cout);
    } else if (*ability) {
      relicd::cmd_export_ability(checkpoint, optional_path(out), std::cout);
    } else if (*rel) {
      relicd::cmd_export_reliability(checkpoint, relicd::parse_split_name(split), bins, optional_path(out),
                                     std::cout);
    }
  } catch (const relicd::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
