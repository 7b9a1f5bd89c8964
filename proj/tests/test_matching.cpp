#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dreamer/matching.hpp"
#include "test_util.hpp"

using namespace dreamer;

namespace {

// Trigram counts from an explicit trigram list, hashed with the embedder's
// bucket function, L2-normalized.
Embedding from_trigrams(const std::vector<std::u32string>& trigrams) {
  Embedding v(HashedTrigramEmbedder::kDimension, 0.0);
  for (const auto& t : trigrams) v[HashedTrigramEmbedder::bucket(t[0], t[1], t[2])] += 1.0;
  double n = 0.0;
  for (double x : v) n += x * x;
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

double dot(const Embedding& a, const Embedding& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

const std::vector<std::u32string> kSettings = {U"\x02Se", U"Set", U"ett", U"tti", U"tin", U"ing", U"ngs", U"gs\x03"};
const std::vector<std::u32string> kSetting = {U"\x02Se", U"Set", U"ett", U"tti", U"tin", U"ing", U"ng\x03"};
const std::vector<std::u32string> kWiFi = {U"\x02Wi", U"Wi-", U"i-F", U"-Fi", U"Fi\x03"};

class ConstantProvider final : public TokenLogProbProvider {
 public:
  explicit ConstantProvider(double lp) : lp_(lp) {}
  double log_prob(std::span<const std::uint8_t>, std::uint8_t) const override { return lp_; }

 private:
  double lp_;
};

std::vector<PredictedElement> lift(const std::vector<Element>& es) {
  std::vector<PredictedElement> out;
  for (const auto& e : es) out.push_back(PredictedElement::lift(e, default_label_vocabulary()));
  return out;
}

}  // namespace

TEST(TextEmbedding, UnitOrZero) {
  const auto e = embed_text("Home");
  EXPECT_EQ(e.size(), 256u);
  EXPECT_NEAR(dot(e, e), 1.0, 1e-12);
  EXPECT_NEAR(cosine(embed_text("Home"), embed_text("Home")), 1.0, 1e-12);
  const auto z = embed_text("");
  EXPECT_TRUE(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }));
  EXPECT_EQ(cosine(z, embed_text("x")), 0.0);
}

TEST(TextEmbedding, MatchesHandEnumeratedTrigrams) {
  EXPECT_EQ(embed_text("Settings"), from_trigrams(kSettings));
  EXPECT_EQ(embed_text("Setting"), from_trigrams(kSetting));
  EXPECT_EQ(embed_text("Wi-Fi"), from_trigrams(kWiFi));
  EXPECT_EQ(embed_text("a"), from_trigrams({U"\x02" U"a\x03"}));
}

TEST(TextEmbedding, SharedTrigramsOrderSimilarity) {
  // 6 shared trigrams out of 8 and 7; none shared with Wi-Fi
  const double near = cosine(embed_text("Settings"), embed_text("Setting"));
  const double far = cosine(embed_text("Settings"), embed_text("Wi-Fi"));
  EXPECT_NEAR(near, dot(from_trigrams(kSettings), from_trigrams(kSetting)), 1e-12);
  EXPECT_NEAR(far, dot(from_trigrams(kSettings), from_trigrams(kWiFi)), 1e-12);
  EXPECT_GT(near, far);
}

TEST(LabelDistribution, SmoothedLift) {
  const auto d = LabelDistribution::smoothed("button", default_label_vocabulary(), 0.05);
  EXPECT_NO_THROW(d.validate());
  EXPECT_DOUBLE_EQ(d.prob("button"), 1.0 - 0.05 + 0.05 / 8);
  EXPECT_DOUBLE_EQ(d.prob("text"), 0.05 / 8);
  EXPECT_EQ(d.prob("unknown"), 0.0);
  EXPECT_DOUBLE_EQ(label_nll_cap(0.05, 8), -std::log(0.05 / 8));
}

TEST(PairCost, PerfectMatchFloor) {
  const Element e("button", "OK", BBox(0, 0, 100, 50));
  const auto t = pair_cost_terms(PredictedElement::lift(e, default_label_vocabulary()), e, CostWeights{});
  EXPECT_EQ(t.bbox, 0.0);
  EXPECT_EQ(t.text, 0.0);
  EXPECT_DOUBLE_EQ(t.label, -std::log(1.0 - 0.05 + 0.05 / 8));
}

TEST(PairCost, MicroShiftBboxTerm) {
  const Element gt("button", "Home", BBox(100, 200, 300, 400));
  const PredictedElement pred{LabelDistribution::smoothed("button", default_label_vocabulary()), "Home",
                              BBox(101, 199, 301, 399)};
  const auto t = pair_cost_terms(pred, gt, CostWeights{});
  EXPECT_DOUBLE_EQ(t.bbox, 1.0 - 39601.0 / 40399.0);
  EXPECT_NEAR(t.bbox, 0.0198, 1e-4);
}

TEST(PairCost, DisjointWrongLabelUnrelatedText) {
  const Element gt("text", "Wi-Fi", BBox(0, 0, 10, 10));
  PredictedElement pred{{{{"button", 0.95}, {"text", 0.05}}}, "Settings", BBox(50, 50, 60, 60)};
  const double text_cos = dot(from_trigrams(kSettings), from_trigrams(kWiFi));
  const double expected = 1.0 + std::min(-std::log(0.05), label_nll_cap(0.05, 8)) + (1.0 - text_cos);
  EXPECT_NEAR(pair_cost(pred, gt, CostWeights{}), expected, 1e-12);
}

TEST(PairCost, MissingLabelHitsCap) {
  const Element gt("switch", "x", BBox(0, 0, 1, 1));
  PredictedElement pred{{{{"button", 1.0}}}, "x", BBox(0, 0, 1, 1)};
  const CostWeights w;
  EXPECT_DOUBLE_EQ(pair_cost_terms(pred, gt, w).label, w.label_nll_cap);
}

TEST(PairCost, WeightsScaleTerms) {
  const Element gt("text", "abc", BBox(0, 0, 10, 10));
  const PredictedElement pred{LabelDistribution::smoothed("icon", default_label_vocabulary()), "abd", BBox(2, 0, 12, 10)};
  const auto unit = pair_cost_terms(pred, gt, CostWeights{});
  CostWeights w;
  w.lambda_bbox = 2.0;
  w.lambda_label = 0.5;
  w.lambda_text = 3.0;
  const auto scaled = pair_cost_terms(pred, gt, w);
  EXPECT_DOUBLE_EQ(scaled.bbox, 2.0 * unit.bbox);
  EXPECT_DOUBLE_EQ(scaled.label, 0.5 * unit.label);
  EXPECT_DOUBLE_EQ(scaled.text, 3.0 * unit.text);
}

TEST(MatchLoss, ZeroFloorWithCorrectLabelProbability) {
  const std::vector<Element> gt = {Element("button", "OK", BBox(0, 0, 100, 100)),
                                   Element("text", "Cancel", BBox(500, 500, 700, 600))};
  std::vector<PredictedElement> pred;
  for (const auto& e : gt) pred.push_back({{{{e.label(), 0.8}, {"image", 0.2}}}, e.text(), e.bbox()});
  const auto l = match_loss(pred, gt, CostWeights{});
  EXPECT_DOUBLE_EQ(l.match_loss, -std::log(0.8));
  EXPECT_EQ(l.bbox_term, 0.0);
  EXPECT_EQ(l.text_term, 0.0);
  EXPECT_FALSE(l.degenerate);
}

TEST(MatchLoss, ExtraWrongPredictionIsUnmatchedAndFree) {
  const std::vector<Element> gt = {Element("button", "OK", BBox(0, 0, 100, 100)),
                                   Element("text", "Cancel", BBox(500, 500, 700, 600))};
  auto pred = lift(gt);
  pred.insert(pred.begin() + 1, PredictedElement::lift(Element("image", "zzz", BBox(1000, 1000, 1100, 1100)),
                                                       default_label_vocabulary()));
  const auto l = match_loss(pred, gt, CostWeights{});
  ASSERT_EQ(l.matching.pairs.size(), 2u);
  for (auto [k, n] : l.matching.pairs) EXPECT_NE(k, 1u);
  EXPECT_EQ(l.unmatched_pred, 1u);

  // exhaustive: every ordered choice of 2 of the 3 predictions
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      if (a != b) best = std::min(best, pair_cost(pred[a], gt[0], {}) + pair_cost(pred[b], gt[1], {}));
  EXPECT_NEAR(l.match_loss, best / 2.0, 1e-12);
  EXPECT_NEAR(l.match_loss, match_loss(lift(gt), gt, CostWeights{}).match_loss, 1e-12);
}

TEST(MatchLoss, UnmatchedPenaltyAveragesOverAllElements) {
  const std::vector<Element> gt = {Element("button", "OK", BBox(0, 0, 100, 100))};
  auto pred = lift(gt);
  pred.push_back(PredictedElement::lift(Element("image", "zzz", BBox(900, 900, 1000, 1000)), default_label_vocabulary()));
  CostWeights w;
  w.unmatched_penalty = 2.5;
  const double floor = -std::log(1.0 - 0.05 + 0.05 / 8);
  EXPECT_NEAR(match_loss(pred, gt, w).match_loss, (floor + 2.5) / 2.0, 1e-12);
}

TEST(MatchLoss, DegenerateWhenEitherSideEmpty) {
  const std::vector<Element> gt = {Element("button", "OK", BBox(0, 0, 1, 1))};
  const auto a = match_loss({}, gt, CostWeights{});
  EXPECT_TRUE(a.degenerate);
  EXPECT_EQ(a.match_loss, 0.0);
  const auto b = match_loss(lift(gt), std::vector<Element>{}, CostWeights{});
  EXPECT_TRUE(b.degenerate);
  EXPECT_EQ(b.match_loss, 0.0);
}

TEST(MatchLoss, PermutationInvariant) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto gt = testutil::random_state(rng, 0, 10).elements;
    const auto pred = lift(testutil::random_state(rng, 0, 10).elements);
    const double base = match_loss(pred, gt, CostWeights{}).match_loss;
    for (int r = 0; r < 5; ++r) {
      EXPECT_NEAR(match_loss(testutil::shuffled(pred, rng), testutil::shuffled(gt, rng), CostWeights{}).match_loss,
                  base, 1e-9);
    }
  }
}

TEST(MatchLoss, NonNegativeTerms) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    const auto gt = testutil::random_state(rng, 0, 8).elements;
    const auto l = match_loss(lift(testutil::random_state(rng, 0, 8).elements), gt, CostWeights{});
    EXPECT_GE(l.match_loss, 0.0);
    EXPECT_GE(l.bbox_term, 0.0);
    EXPECT_GE(l.label_term, 0.0);
    EXPECT_GE(l.text_term, 0.0);
    EXPECT_NEAR(l.match_loss, l.bbox_term + l.label_term + l.text_term, 1e-9);
  }
}

TEST(MatchLoss, MicroShiftChangesLossByLittle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    std::vector<Element> gt;
    for (int i = 0; i < 5; ++i)
      gt.emplace_back("button", testutil::random_text(rng, 4), BBox(10 + 400 * i, 10, 210 + 400 * i, 210));
    std::vector<Element> shifted;
    for (const auto& e : gt) {
      auto d = [&] { return testutil::uniform_int(rng, -1, 1); };
      const auto& b = e.bbox();
      shifted.emplace_back(e.label(), e.text(), BBox(b.x1() + d(), b.y1() + d(), b.x2() + d(), b.y2() + d()));
    }
    const double a = match_loss(lift(gt), gt, CostWeights{}).match_loss;
    const double b = match_loss(lift(shifted), gt, CostWeights{}).match_loss;
    EXPECT_LE(std::abs(a - b), 0.03);
  }
}

TEST(CrossEntropy, ClosedForms) {
  const std::vector<std::uint8_t> tokens(7, 'a');
  EXPECT_EQ(ce_loss(tokens, ConstantProvider(0.0)), 0.0);
  EXPECT_NEAR(ce_loss(tokens, ConstantProvider(std::log(0.5))), 7 * std::log(2.0), 1e-12);
  const std::vector<std::uint8_t> four = {'a', 'b', 'c', 'd'};
  EXPECT_NEAR(ce_loss(four, ConstantProvider(std::log(0.1))), 4 * std::log(10.0), 1e-12);
  EXPECT_THROW(ce_loss(four, ConstantProvider(0.5)), std::domain_error);
}

TEST(CrossEntropy, ByteTokensFollowSerialization) {
  SketchState s{{Element("text", "é", BBox(0, 0, 1, 1))}};
  const auto t = byte_tokens(s);
  EXPECT_EQ(std::string(t.begin(), t.end()), serialize_state(s));
  RecordedLogProbs recorded(std::vector<double>(t.size(), std::log(0.5)));
  EXPECT_NEAR(ce_loss(t, recorded), static_cast<double>(t.size()) * std::log(2.0), 1e-12);
  RecordedLogProbs short_rec({-1.0});
  EXPECT_THROW(ce_loss(t, short_rec), ProviderUnavailable);
}

TEST(TotalLoss, RequiresProviderWhenCeWeighted) {
  const SketchState gt{{Element("text", "a", BBox(0, 0, 1, 1))}};
  EXPECT_THROW(total_loss(lift(gt.elements), gt, CostWeights{}), ProviderUnavailable);
  CostWeights w;
  w.lambda_ce = 0.0;
  EXPECT_NO_THROW(total_loss(lift(gt.elements), gt, w));
}

TEST(TotalLoss, Additive) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 100; ++t) {
    SketchState gt = testutil::random_state(rng, 0, 6);
    const auto pred = lift(testutil::random_state(rng, 0, 6).elements);
    CostWeights w;
    w.lambda_ce = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const ConstantProvider provider(-std::uniform_real_distribution<double>(0.0, 2.0)(rng));
    const auto l = total_loss(pred, gt, w, &provider);
    EXPECT_TRUE(l.ce_available);
    EXPECT_NEAR(l.total, l.match_loss + w.lambda_ce * l.ce_loss, 1e-9);
  }
}
