#pragma once

// Order-invariant element matching objective: weighted pair cost, optimal
// one-to-one assignment, set-level matching loss, and the combined objective
// with an optional token-level cross-entropy term.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dreamer/assignment.hpp"
#include "dreamer/sketch.hpp"
#include "dreamer/text_embedding.hpp"

namespace dreamer {

inline constexpr double kDefaultLabelSmoothing = 0.05;

// Label vocabulary assumed when no corpus vocabulary is supplied.
inline const std::vector<std::string>& default_label_vocabulary() {
  static const std::vector<std::string> labels = {"button", "checkbox", "icon", "image",
                                                  "input",  "switch",   "tab",  "text"};
  return labels;
}

// Largest finite label NLL under a smoothed distribution: -ln(eps / V).
inline double label_nll_cap(double epsilon, std::size_t vocabulary_size) {
  return -std::log(epsilon / static_cast<double>(vocabulary_size));
}

struct LabelDistribution {
  std::map<std::string, double> probs;

  void validate() const {
    if (probs.empty()) throw std::invalid_argument("label distribution is empty");
    double sum = 0.0;
    for (const auto& [label, p] : probs) {
      if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("probability of '" + label + "' outside (0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("label probabilities do not sum to 1");
  }

  // 0 for labels absent from the distribution.
  double prob(const std::string& label) const {
    auto it = probs.find(label);
    return it == probs.end() ? 0.0 : it->second;
  }

  // Mass 1 - eps on `label`, eps spread uniformly over the vocabulary
  // (which is extended with `label` if missing).
  static LabelDistribution smoothed(const std::string& label, std::vector<std::string> vocabulary,
                                    double epsilon = kDefaultLabelSmoothing) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0,1)");
    if (std::find(vocabulary.begin(), vocabulary.end(), label) == vocabulary.end()) vocabulary.push_back(label);
    const double share = epsilon / static_cast<double>(vocabulary.size());
    LabelDistribution d;
    for (const auto& l : vocabulary) d.probs[l] = share;
    d.probs[label] = 1.0 - epsilon + share;
    return d;
  }
};

struct PredictedElement {
  LabelDistribution label_dist;
  std::string text;
  BBox bbox;

  // Hard-label prediction lifted to a smoothed distribution.
  static PredictedElement lift(const Element& e, const std::vector<std::string>& vocabulary,
                               double epsilon = kDefaultLabelSmoothing) {
    return {LabelDistribution::smoothed(e.label(), vocabulary, epsilon), e.text(), e.bbox()};
  }
};

inline std::vector<PredictedElement> lift_state(const SketchState& s, const std::vector<std::string>& vocabulary,
                                                double epsilon = kDefaultLabelSmoothing) {
  std::vector<PredictedElement> out;
  out.reserve(s.size());
  for (const auto& e : s.elements) out.push_back(PredictedElement::lift(e, vocabulary, epsilon));
  return out;
}

struct CostWeights {
  double lambda_bbox = 1.0;
  double lambda_label = 1.0;
  double lambda_text = 1.0;
  double lambda_ce = 1.0;
  double label_nll_cap = dreamer::label_nll_cap(kDefaultLabelSmoothing, default_label_vocabulary().size());
  // Charged per unmatched element when set; off by default so the loss
  // averages over matched pairs only.
  std::optional<double> unmatched_penalty;

  void validate() const {
    for (double w : {lambda_bbox, lambda_label, lambda_text, lambda_ce})
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("cost weights must be finite and >= 0");
    if (!(label_nll_cap > 0.0)) throw std::invalid_argument("label_nll_cap must be positive");
    if (unmatched_penalty && !(*unmatched_penalty >= 0.0))
      throw std::invalid_argument("unmatched_penalty must be >= 0");
  }
};

struct PairCost {
  double bbox = 0.0;   // weighted
  double label = 0.0;  // weighted
  double text = 0.0;   // weighted
  double total = 0.0;
};

namespace detail {

inline double label_nll(const LabelDistribution& dist, const std::string& label, double cap) {
  const double p = dist.prob(label);
  if (p <= 0.0) return cap;
  return std::min(0.0 - std::log(p), cap);
}

// Identical strings are exactly similar regardless of the embedder.
inline double text_cosine(const std::string& a, const Embedding& ea, const std::string& b, const Embedding& eb) {
  if (a == b) return 1.0;
  return std::min(1.0, cosine(ea, eb));
}

inline PairCost pair_cost(const PredictedElement& pred, const Embedding& pred_emb, const Element& gt,
                          const Embedding& gt_emb, const CostWeights& w) {
  PairCost c;
  c.bbox = w.lambda_bbox * (1.0 - iou(pred.bbox, gt.bbox()));
  c.label = w.lambda_label * label_nll(pred.label_dist, gt.label(), w.label_nll_cap);
  c.text = w.lambda_text * (1.0 - text_cosine(pred.text, pred_emb, gt.text(), gt_emb));
  c.total = c.bbox + c.label + c.text;
  return c;
}

}  // namespace detail

inline PairCost pair_cost_terms(const PredictedElement& pred, const Element& gt, const CostWeights& w,
                                const TextEmbedder& embedder = default_embedder()) {
  return detail::pair_cost(pred, embedder.embed(pred.text), gt, embedder.embed(gt.text()), w);
}

inline double pair_cost(const PredictedElement& pred, const Element& gt, const CostWeights& w,
                        const TextEmbedder& embedder = default_embedder()) {
  return pair_cost_terms(pred, gt, w, embedder).total;
}

struct LossBreakdown {
  double match_loss = 0.0;
  double bbox_term = 0.0;   // mean weighted bbox cost over matched pairs
  double label_term = 0.0;  // mean weighted label cost over matched pairs
  double text_term = 0.0;   // mean weighted text cost over matched pairs
  double ce_loss = 0.0;
  double total = 0.0;
  Matching matching;
  bool degenerate = false;  // min(K, N) == 0
  bool ce_available = false;
  std::size_t unmatched_pred = 0;
  std::size_t unmatched_gt = 0;
};

inline LossBreakdown match_loss(const std::vector<PredictedElement>& pred, const std::vector<Element>& gt,
                                const CostWeights& w, const TextEmbedder& embedder = default_embedder()) {
  w.validate();
  LossBreakdown out;
  const std::size_t K = pred.size(), N = gt.size();

  std::vector<Embedding> pred_emb, gt_emb;
  pred_emb.reserve(K);
  gt_emb.reserve(N);
  for (const auto& p : pred) pred_emb.push_back(embedder.embed(p.text));
  for (const auto& g : gt) gt_emb.push_back(embedder.embed(g.text()));

  CostMatrix matrix(K, N);
  std::vector<PairCost> terms(K * N);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < N; ++n) {
      terms[k * N + n] = detail::pair_cost(pred[k], pred_emb[k], gt[n], gt_emb[n], w);
      matrix(k, n) = terms[k * N + n].total;
    }
  }
  out.matching = optimal_matching(matrix);
  const std::size_t m = out.matching.pairs.size();
  out.degenerate = m == 0;
  out.unmatched_pred = K - m;
  out.unmatched_gt = N - m;

  double sum = 0.0, bbox = 0.0, label = 0.0, text = 0.0;
  for (auto [k, n] : out.matching.pairs) {
    const auto& t = terms[k * N + n];
    sum += t.total;
    bbox += t.bbox;
    label += t.label;
    text += t.text;
  }
  if (m > 0) {
    out.bbox_term = bbox / static_cast<double>(m);
    out.label_term = label / static_cast<double>(m);
    out.text_term = text / static_cast<double>(m);
  }
  if (w.unmatched_penalty) {
    const std::size_t unmatched = out.unmatched_pred + out.unmatched_gt;
    if (m + unmatched > 0)
      out.match_loss = (sum + *w.unmatched_penalty * static_cast<double>(unmatched)) / static_cast<double>(m + unmatched);
  } else if (m > 0) {
    out.match_loss = sum / static_cast<double>(m);
  }
  out.total = out.match_loss;
  return out;
}

inline LossBreakdown match_loss(const std::vector<PredictedElement>& pred, const SketchState& gt,
                                const CostWeights& w, const TextEmbedder& embedder = default_embedder()) {
  return match_loss(pred, gt.elements, w, embedder);
}

// ---------------------------------------------------------------------------
// Token-level cross-entropy

class ProviderUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Byte-level next-token log-probabilities, conditioned on the prefix.
class TokenLogProbProvider {
 public:
  virtual ~TokenLogProbProvider() = default;
  virtual double log_prob(std::span<const std::uint8_t> prefix, std::uint8_t token) const = 0;
};

// Replays per-position log-probabilities recorded by an external scorer.
class RecordedLogProbs final : public TokenLogProbProvider {
 public:
  explicit RecordedLogProbs(std::vector<double> values) : values_(std::move(values)) {}
  double log_prob(std::span<const std::uint8_t> prefix, std::uint8_t) const override {
    if (prefix.size() >= values_.size())
      throw ProviderUnavailable("recorded log-probabilities end at position " + std::to_string(values_.size()));
    return values_[prefix.size()];
  }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  std::vector<double> values_;
};

// Tokens are the bytes of the canonical line serialization, in on-disk order.
inline std::vector<std::uint8_t> byte_tokens(const SketchState& s) {
  const auto text = serialize_state(s);
  return {text.begin(), text.end()};
}

inline double ce_loss(std::span<const std::uint8_t> tokens, const TokenLogProbProvider& provider) {
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double lp = provider.log_prob(tokens.first(i), tokens[i]);
    if (std::isnan(lp) || lp > 0.0) throw std::domain_error("log-probability must be <= 0");
    sum -= lp;
  }
  return sum;
}

// match_loss + lambda_ce * ce_loss. Without a provider the CE term requires
// lambda_ce == 0.
inline LossBreakdown total_loss(const std::vector<PredictedElement>& pred, const SketchState& gt,
                                const CostWeights& w, const TokenLogProbProvider* provider = nullptr,
                                const TextEmbedder& embedder = default_embedder()) {
  LossBreakdown out = match_loss(pred, gt.elements, w, embedder);
  if (provider != nullptr) {
    const auto tokens = byte_tokens(gt);
    out.ce_loss = ce_loss(tokens, *provider);
    out.ce_available = true;
  } else if (w.lambda_ce > 0.0) {
    throw ProviderUnavailable("lambda_ce > 0 requires a token log-probability provider");
  }
  out.total = out.match_loss + w.lambda_ce * out.ce_loss;
  return out;
}

}  // namespace dreamer
