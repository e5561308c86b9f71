#include "relicd/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <vector>

#include "relicd/errors.hpp"

namespace relicd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

class FieldParser {
 public:
  explicit FieldParser(const std::map<std::string, std::string>& pairs) : pairs_(pairs) {}

  void real(const std::string& key, double& out) {
    with(key, [&](const std::string& v) {
      errno = 0;
      char* end = nullptr;
      const double x = std::strtod(v.c_str(), &end);
      if (v.empty() || *end != '\0' || errno == ERANGE) throw std::invalid_argument("not a number");
      out = x;
    });
  }

  void count(const std::string& key, std::size_t& out) {
    with(key, [&](const std::string& v) {
      errno = 0;
      char* end = nullptr;
      if (v.empty() || v[0] == '-') throw std::invalid_argument("not a nonnegative integer");
      const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
      if (*end != '\0' || errno == ERANGE) throw std::invalid_argument("not a nonnegative integer");
      out = static_cast<std::size_t>(x);
    });
  }

  void seed(const std::string& key, std::uint64_t& out) {
    std::size_t v = out;
    count(key, v);
    out = v;
  }

  void flag(const std::string& key, bool& out) {
    with(key, [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes") {
        out = true;
      } else if (v == "false" || v == "0" || v == "no") {
        out = false;
      } else {
        throw std::invalid_argument("not a boolean");
      }
    });
  }

  void text(const std::string& key, const std::function<void(const std::string&)>& set) { with(key, set); }

  std::vector<std::string> errors;

 private:
  void with(const std::string& key, const std::function<void(const std::string&)>& fn) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return;
    try {
      fn(it->second);
    } catch (const std::exception& e) {
      errors.push_back(key + " = '" + it->second + "': " + e.what());
    }
  }

  const std::map<std::string, std::string>& pairs_;
};

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "logs", "qmatrix", "output_dir", "min_logs", "variant", "irt_scale", "ncd_hidden1", "ncd_hidden2",
      "gamma", "beta", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon",
      "pretrain_epochs", "max_epochs", "patience", "seed", "dropout_enabled", "dropout_alpha",
      "dropout_keep_probability", "calibration_mode", "kl_dedup", "bins", "train_fraction",
      "validation_fraction", "test_fraction", "shuffle_split"};
  return keys;
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_pairs() const {
  return {
      {"logs", logs.string()},
      {"qmatrix", qmatrix.string()},
      {"output_dir", output_dir.string()},
      {"min_logs", std::to_string(min_logs)},
      {"variant", std::string(to_string(diagnostic.variant))},
      {"irt_scale", fmt_double(diagnostic.irt_scale)},
      {"ncd_hidden1", std::to_string(diagnostic.hidden1)},
      {"ncd_hidden2", std::to_string(diagnostic.hidden2)},
      {"gamma", fmt_double(train.gamma)},
      {"beta", fmt_double(train.beta)},
      {"batch_size", std::to_string(train.batch_size)},
      {"learning_rate", fmt_double(train.adam.learning_rate)},
      {"adam_beta1", fmt_double(train.adam.beta1)},
      {"adam_beta2", fmt_double(train.adam.beta2)},
      {"adam_epsilon", fmt_double(train.adam.epsilon)},
      {"pretrain_epochs", std::to_string(train.pretrain_epochs)},
      {"max_epochs", std::to_string(train.max_epochs)},
      {"patience", std::to_string(train.patience)},
      {"seed", std::to_string(train.seed)},
      {"dropout_enabled", fmt_bool(train.dropout.enabled)},
      {"dropout_alpha", fmt_double(train.dropout.alpha)},
      {"dropout_keep_probability", fmt_double(train.dropout.keep_probability)},
      {"calibration_mode", std::string(to_string(train.calibration_mode))},
      {"kl_dedup", fmt_bool(train.kl_dedup)},
      {"bins", std::to_string(train.bins)},
      {"train_fraction", fmt_double(split.train)},
      {"validation_fraction", fmt_double(split.validation)},
      {"test_fraction", fmt_double(split.test)},
      {"shuffle_split", fmt_bool(split.shuffle)},
  };
}

RunConfig RunConfig::from_pairs(const std::map<std::string, std::string>& pairs,
                                const std::filesystem::path& base_dir) {
  RunConfig cfg;
  FieldParser p(pairs);
  for (const auto& [key, _] : pairs) {
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
      p.errors.push_back("unknown key '" + key + "'");
    }
  }
  auto path_field = [&](const std::string& key, std::filesystem::path& out) {
    p.text(key, [&](const std::string& v) {
      std::filesystem::path path(v);
      out = path.is_relative() && !base_dir.empty() ? base_dir / path : path;
      out = out.lexically_normal();
    });
  };
  path_field("logs", cfg.logs);
  path_field("qmatrix", cfg.qmatrix);
  path_field("output_dir", cfg.output_dir);
  p.count("min_logs", cfg.min_logs);
  p.text("variant", [&](const std::string& v) { cfg.diagnostic.variant = parse_variant(v); });
  p.real("irt_scale", cfg.diagnostic.irt_scale);
  p.count("ncd_hidden1", cfg.diagnostic.hidden1);
  p.count("ncd_hidden2", cfg.diagnostic.hidden2);
  p.real("gamma", cfg.train.gamma);
  p.real("beta", cfg.train.beta);
  p.count("batch_size", cfg.train.batch_size);
  p.real("learning_rate", cfg.train.adam.learning_rate);
  p.real("adam_beta1", cfg.train.adam.beta1);
  p.real("adam_beta2", cfg.train.adam.beta2);
  p.real("adam_epsilon", cfg.train.adam.epsilon);
  p.count("pretrain_epochs", cfg.train.pretrain_epochs);
  p.count("max_epochs", cfg.train.max_epochs);
  p.count("patience", cfg.train.patience);
  p.seed("seed", cfg.train.seed);
  p.flag("dropout_enabled", cfg.train.dropout.enabled);
  p.real("dropout_alpha", cfg.train.dropout.alpha);
  p.real("dropout_keep_probability", cfg.train.dropout.keep_probability);
  p.text("calibration_mode",
         [&](const std::string& v) { cfg.train.calibration_mode = parse_calibration_mode(v); });
  p.flag("kl_dedup", cfg.train.kl_dedup);
  p.count("bins", cfg.train.bins);
  p.real("train_fraction", cfg.split.train);
  p.real("validation_fraction", cfg.split.validation);
  p.real("test_fraction", cfg.split.test);
  p.flag("shuffle_split", cfg.split.shuffle);
  cfg.split.seed = derive_seed(cfg.train.seed, "split");

  if (!p.errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : p.errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return cfg;
}

void RunConfig::validate() const {
  std::vector<std::string> errors;
  auto collect = [&](const std::function<void()>& check) {
    try {
      check();
    } catch (const ValidationError& e) {
      errors.push_back(e.what());
    }
  };
  if (logs.empty()) {
    errors.push_back("logs path is not set");
  } else if (!std::filesystem::is_regular_file(logs)) {
    errors.push_back("logs file does not exist: " + logs.string());
  }
  if (qmatrix.empty()) {
    errors.push_back("qmatrix path is not set");
  } else if (!std::filesystem::is_regular_file(qmatrix)) {
    errors.push_back("qmatrix file does not exist: " + qmatrix.string());
  }
  if (output_dir.empty()) errors.push_back("output_dir is not set");
  if (min_logs < 3) errors.push_back("min_logs must be >= 3 so every student can be split");
  if (!(diagnostic.irt_scale > 0.0)) errors.push_back("irt_scale must be > 0");
  if (diagnostic.hidden1 == 0 || diagnostic.hidden2 == 0) errors.push_back("NCD hidden sizes must be >= 1");
  collect([&] { train.validate(); });
  collect([&] { split.validate(); });
  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> pairs;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back(source + ":" + std::to_string(line_no) + ": empty key");
      continue;
    }
    if (!pairs.emplace(key, value).second) {
      errors.push_back(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config file:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return pairs;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  const auto pairs = parse_key_values(in, path.string());
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return RunConfig::from_pairs(pairs, std::filesystem::absolute(base));
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : cfg.to_pairs()) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace relicd
