#include "threshcal/roc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "csv_detail.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

namespace {

struct Tally {
  double threshold;
  std::size_t tp;  // cumulative counts for value >= threshold
  std::size_t fp;
};

// One entry per unique value, thresholds descending.
std::vector<Tally> tally_descending(std::span<const double> values,
                                    std::span<const Label> labels) {
  if (values.size() != labels.size()) {
    raise(Errc::ConfigInvalid, "values and labels differ in length");
  }
  std::vector<std::pair<double, Label>> pairs;
  pairs.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) pairs.emplace_back(values[i], labels[i]);
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& l, const auto& r) { return l.first > r.first; });

  std::vector<Tally> out;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) {
      if (pairs[j].second == Label::PASS) ++tp;
      else ++fp;
      ++j;
    }
    out.push_back({pairs[i].first, tp, fp});
    i = j;
  }
  return out;
}

}  // namespace

RocCurve roc_curve(std::span<const double> values, std::span<const Label> labels) {
  std::size_t pos = 0, neg = 0;
  for (Label l : labels) (l == Label::PASS ? pos : neg)++;
  if (pos == 0 || neg == 0) raise(Errc::SingleClass, "ROC needs both labels");

  const auto tallies = tally_descending(values, labels);
  RocCurve curve;
  curve.points.reserve(tallies.size() + 1);
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const auto& t : tallies) {
    curve.points.push_back({t.threshold,
                            static_cast<double>(t.tp) / static_cast<double>(pos),
                            static_cast<double>(t.fp) / static_cast<double>(neg)});
  }
  double auc = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  curve.auc = auc;
  return curve;
}

PrCurve pr_curve(std::span<const double> values, std::span<const Label> labels) {
  std::size_t pos = 0;
  for (Label l : labels) pos += (l == Label::PASS);
  if (pos == 0) raise(Errc::NoPositives, "PR curve needs at least one PASS");

  const auto tallies = tally_descending(values, labels);
  PrCurve curve;
  curve.points.reserve(tallies.size());
  for (auto it = tallies.rbegin(); it != tallies.rend(); ++it) {
    const double tp = static_cast<double>(it->tp);
    const double fp = static_cast<double>(it->fp);
    curve.points.push_back({it->threshold, tp / (tp + fp), tp / static_cast<double>(pos)});
  }
  // Ascending thresholds means non-increasing recall; pair each precision
  // with the recall mass down to the next point.
  double ap = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double next_recall = i + 1 < curve.points.size() ? curve.points[i + 1].recall : 0.0;
    ap += (curve.points[i].recall - next_recall) * curve.points[i].precision;
  }
  curve.average_precision = ap;
  return curve;
}

double threshold_at_fpr(const RocCurve& curve, double max_fpr) {
  if (!(max_fpr >= 0.0 && max_fpr <= 1.0)) {
    raise(Errc::OutOfRange, "max_fpr must lie in [0,1]");
  }
  // fpr is non-decreasing as thresholds fall, so qualifying thresholds form
  // a prefix of the descending list; the last qualifying one is smallest.
  double best = curve.points.front().threshold;
  for (const auto& p : curve.points) {
    if (p.fpr <= max_fpr) best = p.threshold;
    else break;
  }
  return best;
}

RecallSelection threshold_at_recall(std::span<const double> values,
                                    std::span<const Label> labels, double target_recall) {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    raise(Errc::OutOfRange, "recall target must lie in (0,1]");
  }
  std::size_t pos = 0;
  for (Label l : labels) pos += (l == Label::PASS);
  if (pos == 0) raise(Errc::NoPositives, "needs at least one PASS");

  const auto tallies = tally_descending(values, labels);
  for (const auto& t : tallies) {
    const double recall = static_cast<double>(t.tp) / static_cast<double>(pos);
    if (recall >= target_recall) {
      const double tp = static_cast<double>(t.tp);
      const double fp = static_cast<double>(t.fp);
      return {t.threshold, tp / (tp + fp), recall};
    }
  }
  // Unreachable: recall at the minimum value is 1.
  const auto& last = tallies.back();
  return {last.threshold, 0.0, 1.0};
}

double youden_threshold(const RocCurve& curve) {
  double best_j = -std::numeric_limits<double>::infinity();
  double best_t = curve.points.front().threshold;
  for (const auto& p : curve.points) {  // descending: first seen wins ties
    const double j = p.tpr - p.fpr;
    if (j > best_j) {
      best_j = j;
      best_t = p.threshold;
    }
  }
  return best_t;
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "threshold,tpr,fpr\n";
  for (const auto& p : curve.points) {
    out << detail::format_double(p.threshold) << ',' << detail::format_double(p.tpr) << ','
        << detail::format_double(p.fpr) << '\n';
  }
}

void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "threshold,precision,recall\n";
  for (const auto& p : curve.points) {
    out << detail::format_double(p.threshold) << ',' << detail::format_double(p.precision)
        << ',' << detail::format_double(p.recall) << '\n';
  }
}

}  // namespace threshcal
