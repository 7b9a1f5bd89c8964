#pragma once

// Element-level forecasting metrics: relaxed greedy one-to-one matching,
// mIoU, text similarity, precision, recall and F1.

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "dreamer/parallel.hpp"
#include "dreamer/sketch.hpp"
#include "dreamer/utf8.hpp"

namespace dreamer {

// Levenshtein distance over code points, two-row DP.
inline std::size_t edit_distance(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  return edit_distance(utf8::decode(a), utf8::decode(b));
}

// Edit distance divided by the longer length; 0 for two empty strings.
inline double normalized_edit_distance(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

inline double text_similarity(std::string_view a, std::string_view b) {
  return 1.0 - normalized_edit_distance(utf8::decode(a), utf8::decode(b));
}

struct EvalConfig {
  double theta_iou = 0.7;
  double theta_txt = 0.3;
  bool dedup_predictions = false;
  bool macro = false;  // per-sample averaging of P/R instead of summed counts

  void validate() const {
    if (!(theta_iou >= 0.0 && theta_iou <= 1.0)) throw std::invalid_argument("theta_iou must be in [0,1]");
    if (!(theta_txt >= 0.0 && theta_txt <= 1.0)) throw std::invalid_argument("theta_txt must be in [0,1]");
  }
};

struct MatchedPair {
  std::size_t pred = 0;  // index into the original prediction
  std::size_t gt = 0;
  double iou = 0.0;
  double text_similarity = 0.0;
};

struct SampleStats {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<MatchedPair> pairs;
};

// Pairs qualify when IoU > theta_iou or normalized edit distance < theta_txt
// (strict inequalities). Qualifying pairs are consumed in descending IoU,
// then ascending edit distance, then (pred, gt) index order.
inline SampleStats greedy_match(const SketchState& pred, const SketchState& gt, const EvalConfig& cfg = {}) {
  std::vector<std::size_t> kept;
  kept.reserve(pred.size());
  if (cfg.dedup_predictions) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (seen.insert(pred.elements[i].text()).second) kept.push_back(i);
  } else {
    kept.resize(pred.size());
    std::iota(kept.begin(), kept.end(), std::size_t{0});
  }

  std::vector<std::vector<char32_t>> gt_text;
  gt_text.reserve(gt.size());
  for (const auto& e : gt.elements) gt_text.push_back(utf8::decode(e.text()));

  struct Candidate {
    double iou;
    double ned;
    std::size_t pred;
    std::size_t gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p : kept) {
    const auto& pe = pred.elements[p];
    const auto ptext = utf8::decode(pe.text());
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double overlap = iou(pe.bbox(), gt.elements[g].bbox());
      const double ned = normalized_edit_distance(ptext, gt_text[g]);
      if (overlap > cfg.theta_iou || ned < cfg.theta_txt) candidates.push_back({overlap, ned, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.iou, a.ned, a.pred, a.gt) < std::tie(a.iou, b.ned, b.pred, b.gt);
  });

  SampleStats stats;
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    stats.pairs.push_back({c.pred, c.gt, c.iou, 1.0 - c.ned});
  }
  stats.tp = stats.pairs.size();
  stats.fp = kept.size() - stats.tp;
  stats.fn = gt.size() - stats.tp;
  return stats;
}

struct EvalReport {
  double miou = 0.0;
  double text_similarity = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t sample_count = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t matched_pairs = 0;
  bool macro = false;
};

class EmptyDataset : public std::invalid_argument {
 public:
  EmptyDataset() : std::invalid_argument("EmptyDataset: evaluation needs at least one sample") {}
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Reduces per-sample stats in sample order, so the result does not depend on
// how the stats were computed.
inline EvalReport reduce_stats(const std::vector<SampleStats>& stats, bool macro) {
  if (stats.empty()) throw EmptyDataset();
  EvalReport r;
  r.sample_count = stats.size();
  r.macro = macro;
  double iou_sum = 0.0, text_sum = 0.0, p_sum = 0.0, r_sum = 0.0;
  for (const auto& s : stats) {
    r.tp += s.tp;
    r.fp += s.fp;
    r.fn += s.fn;
    for (const auto& pair : s.pairs) {
      iou_sum += pair.iou;
      text_sum += pair.text_similarity;
    }
    r.matched_pairs += s.pairs.size();
    p_sum += safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fp));
    r_sum += safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn));
  }
  r.miou = safe_ratio(iou_sum, static_cast<double>(r.matched_pairs));
  r.text_similarity = safe_ratio(text_sum, static_cast<double>(r.matched_pairs));
  if (macro) {
    r.precision = p_sum / static_cast<double>(stats.size());
    r.recall = r_sum / static_cast<double>(stats.size());
  } else {
    r.precision = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
    r.recall = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
  }
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

struct EvalSample {
  SketchState pred;
  SketchState gt;
};

inline EvalReport evaluate_dataset(const std::vector<EvalSample>& samples, const EvalConfig& cfg = {},
                                   std::size_t jobs = 1) {
  cfg.validate();
  if (samples.empty()) throw EmptyDataset();
  std::vector<SampleStats> stats(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) { stats[i] = greedy_match(samples[i].pred, samples[i].gt, cfg); });
  return reduce_stats(stats, cfg.macro);
}

inline json to_json(const EvalReport& r) {
  return json{{"miou", r.miou},
              {"text_similarity", r.text_similarity},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"sample_count", r.sample_count},
              {"tp", r.tp},
              {"fp", r.fp},
              {"fn", r.fn},
              {"matched_pairs", r.matched_pairs},
              {"averaging", r.macro ? "macro" : "micro"}};
}

}  // namespace dreamer
