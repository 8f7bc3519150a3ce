#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace contpat {

struct PRPoint {
  // Distinct score value v; the point counts every score >= v as positive,
  // i.e. the decision s > t for any t in [next lower score, v).
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// One point per distinct score, in descending score order.
// Throws DataError when there is no positive label.
std::vector<PRPoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

// Step-interpolated area of the precision band above 0.5:
// sum over points (increasing recall) of delta_recall * max(P - 0.5, 0).
// A perfect ranking scores 0.5.
double auc_p50(std::span<const PRPoint> curve);

// auc_p50 / 0.5 * 100, so a perfect ranking scores 100.
inline double auc_percent(double band_area) { return band_area / 0.5 * 100.0; }

struct ThresholdChoice {
  double threshold = 0.0;
  double f1 = 0.0;
};

// Candidate thresholds: midpoints between consecutive distinct scores plus
// min - 1 and max + 1. Returns the F1-maximizing candidate, smallest on ties.
// Requires at least one positive and one negative label.
ThresholdChoice tune_threshold(std::span<const double> scores, std::span<const int> labels);

// Candidate grid used by tune_threshold, ascending.
std::vector<double> threshold_candidates(std::span<const double> scores);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision() const;  // 0 when nothing is predicted positive
  double recall() const;
  double f1() const;
};

// Decision rule: positive iff score > threshold.
Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold);

struct EvalReport {
  double auc = 0.0;          // band area, in [0, 0.5]
  double auc_percent = 0.0;  // auc / 0.5 * 100
  double threshold = 0.0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  Confusion confusion;
  std::vector<PRPoint> curve;
};

EvalReport classification_report(std::span<const double> scores, std::span<const int> labels,
                                  double threshold);

}  // namespace contpat
