#include "relicd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace relicd {

namespace {

void require_nonempty(std::span<const ScoredPair> pairs, const char* what) {
  if (pairs.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

double accuracy(std::span<const ScoredPair> pairs) {
  require_nonempty(pairs, "accuracy");
  std::size_t correct = 0;
  for (const auto& p : pairs) correct += predicted_correctly(p.prob, p.label) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double rmse(std::span<const ScoredPair> pairs) {
  require_nonempty(pairs, "rmse");
  double sq = 0.0;
  for (const auto& p : pairs) {
    const double d = p.prob - p.label;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

double auc(std::span<const ScoredPair> pairs) {
  require_nonempty(pairs, "auc");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pairs[a].prob < pairs[b].prob; });

  // average ranks over tie groups
  double pos_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pairs[order[j]].prob == pairs[order[i]].prob) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (pairs[order[k]].label == 1) {
        pos_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = pairs.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("auc: needs at least one positive and one negative label");
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::size_t calibration_bin(double prob, std::size_t bin_count) {
  const double m = static_cast<double>(bin_count);
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(prob * m)) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bin_count) - 1);
  // settle edge cases from rounding in prob * m against the n / M edges
  while (idx > 0 && prob <= static_cast<double>(idx) / m) --idx;
  while (idx + 1 < static_cast<std::ptrdiff_t>(bin_count) && prob > static_cast<double>(idx + 1) / m) ++idx;
  return static_cast<std::size_t>(idx);
}

BinReport calibration(std::span<const ScoredPair> pairs, std::size_t bin_count) {
  require_nonempty(pairs, "calibration");
  if (bin_count == 0) throw std::invalid_argument("calibration: bin count must be >= 1");
  BinReport report;
  report.total = pairs.size();
  report.bins.resize(bin_count);
  std::vector<double> correct(bin_count, 0.0);
  std::vector<double> prob_sum(bin_count, 0.0);
  for (const auto& p : pairs) {
    const auto b = calibration_bin(p.prob, bin_count);
    ++report.bins[b].count;
    correct[b] += predicted_correctly(p.prob, p.label) ? 1.0 : 0.0;
    prob_sum[b] += p.prob;
  }
  const double total = static_cast<double>(pairs.size());
  for (std::size_t b = 0; b < bin_count; ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    bin.accuracy = correct[b] / n;
    bin.avg_prob = prob_sum[b] / n;
    const double gap = std::abs(bin.accuracy - bin.avg_prob);
    report.ece += (n / total) * gap;
    report.mce = std::max(report.mce, gap);
  }
  return report;
}

std::vector<ReliabilityRow> reliability_rows(const BinReport& report) {
  const double m = static_cast<double>(report.bins.size());
  std::vector<ReliabilityRow> rows;
  rows.reserve(report.bins.size());
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& bin = report.bins[b];
    ReliabilityRow r;
    r.bin = b + 1;
    r.lo = static_cast<double>(b) / m;
    r.hi = static_cast<double>(b + 1) / m;
    r.count = bin.count;
    r.accuracy = bin.accuracy;
    r.avg_prob = bin.avg_prob;
    r.gap = bin.count > 0 ? std::abs(bin.accuracy - bin.avg_prob) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

void write_reliability_csv(std::ostream& out, std::span<const ReliabilityRow> rows) {
  out << "bin,lo,hi,count,acc,avg_prob,gap\n";
  for (const auto& r : rows) {
    out << r.bin << ',' << format_fixed(r.lo, 6) << ',' << format_fixed(r.hi, 6) << ',' << r.count << ',';
    if (r.count > 0) {
      out << format_fixed(r.accuracy, 10) << ',' << format_fixed(r.avg_prob, 10) << ',' << format_fixed(r.gap, 10);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

MetricReport compute_metrics(std::span<const ScoredPair> pairs, std::size_t bin_count) {
  MetricReport r;
  r.acc = accuracy(pairs);
  r.rmse = rmse(pairs);
  r.auc = auc(pairs);
  const auto cal = calibration(pairs, bin_count);
  r.ece = cal.ece;
  r.mce = cal.mce;
  return r;
}

}  // namespace relicd
