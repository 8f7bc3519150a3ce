#include "contpat/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "contpat/common.hpp"

namespace contpat {
namespace {

void check_lengths(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::to_string(scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw LabelError("label must be 0 or 1, got " + std::to_string(y));
  }
}

}  // namespace

double Confusion::precision() const {
  return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
}

double Confusion::recall() const {
  return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
}

double Confusion::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::vector<PRPoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw DataError("pr_curve: recall is undefined without positive labels");
  const std::size_t negatives = labels.size() - positives;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });

  std::vector<PRPoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == v; ++i) (labels[order[i]] ? tp : fp)++;
    PRPoint p;
    p.threshold = v;
    p.tp = tp;
    p.fp = fp;
    p.fn = positives - tp;
    p.tn = negatives - fp;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(positives);
    curve.push_back(p);
  }
  return curve;
}

double auc_p50(std::span<const PRPoint> curve) {
  double area = 0.0, prev_recall = 0.0;
  for (const auto& p : curve) {
    area += (p.recall - prev_recall) * std::max(p.precision - 0.5, 0.0);
    prev_recall = p.recall;
  }
  return area;
}

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
  check_lengths(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i]) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  return c;
}

std::vector<double> threshold_candidates(std::span<const double> scores) {
  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> out;
  if (distinct.empty()) return out;
  out.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    out.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  out.push_back(distinct.back() + 1.0);
  return out;
}

ThresholdChoice tune_threshold(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DataError("tune_threshold needs at least one positive and one negative label");
  }
  ThresholdChoice best{0.0, -1.0};
  for (double t : threshold_candidates(scores)) {
    const double f1 = confusion_at(scores, labels, t).f1();
    if (f1 > best.f1) best = {t, f1};
  }
  return best;
}

EvalReport classification_report(std::span<const double> scores, std::span<const int> labels,
                                  double threshold) {
  EvalReport r;
  r.curve = pr_curve(scores, labels);
  r.auc = auc_p50(r.curve);
  r.auc_percent = auc_percent(r.auc);
  r.threshold = threshold;
  r.confusion = confusion_at(scores, labels, threshold);
  r.precision = r.confusion.precision();
  r.recall = r.confusion.recall();
  r.f1 = r.confusion.f1();
  return r;
}

}  // namespace contpat
