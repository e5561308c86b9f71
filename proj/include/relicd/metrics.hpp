#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace relicd {

struct ScoredPair {
  double prob = 0.0;  // in [0,1]
  int label = 0;      // 0 or 1
};

// A prediction counts as correct when (prob >= 0.5) == label; ties predict 1.
inline bool predicted_correctly(double prob, int label) { return (prob >= 0.5) == (label == 1); }

// All of these throw std::invalid_argument on empty input.
double accuracy(std::span<const ScoredPair> pairs);
double rmse(std::span<const ScoredPair> pairs);
// Mann-Whitney: P(pos > neg) + 1/2 P(pos == neg). Throws if only one class is present.
double auc(std::span<const ScoredPair> pairs);

struct CalibrationBin {
  std::size_t count = 0;
  double accuracy = 0.0;  // meaningful only when count > 0
  double avg_prob = 0.0;
};

struct BinReport {
  std::vector<CalibrationBin> bins;
  std::size_t total = 0;
  double ece = 0.0;
  double mce = 0.0;
};

// Bin n (1-based) holds probabilities in ((n-1)/M, n/M]; 0 goes to bin 1.
// Returns the 0-based index.
std::size_t calibration_bin(double prob, std::size_t bin_count);

// ECE = sum_n |B_n|/a |acc(B_n) - avgProb(B_n)|, MCE = max_n of the same gap,
// both over nonempty bins.
BinReport calibration(std::span<const ScoredPair> pairs, std::size_t bin_count = 10);

struct ReliabilityRow {
  std::size_t bin = 0;  // 1-based
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double avg_prob = 0.0;
  double gap = 0.0;
};

std::vector<ReliabilityRow> reliability_rows(const BinReport& report);

// Header `bin,lo,hi,count,acc,avg_prob,gap`; empty bins leave the last three
// fields blank.
void write_reliability_csv(std::ostream& out, std::span<const ReliabilityRow> rows);

struct MetricReport {
  double acc = 0.0;
  double rmse = 0.0;
  double auc = 0.0;
  double ece = 0.0;
  double mce = 0.0;
};

MetricReport compute_metrics(std::span<const ScoredPair> pairs, std::size_t bin_count = 10);

// Fixed-point formatting used by every CSV writer.
std::string format_fixed(double value, int decimals);

}  // namespace relicd
