#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>

#include "dreamer/metrics.hpp"
#include "test_util.hpp"

using namespace dreamer;

namespace {

// Memoized recursive Levenshtein over code points.
std::size_t levenshtein_oracle(const std::u32string& a, const std::u32string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    const std::size_t best = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    memo[{i, j}] = best;
    return best;
  };
  return d(a.size(), b.size());
}

std::u32string random_u32(std::mt19937_64& rng) {
  static const std::u32string alphabet = U"abcé日😀";
  std::u32string s;
  const int n = testutil::uniform_int(rng, 0, 9);
  for (int i = 0; i < n; ++i) s.push_back(alphabet[static_cast<std::size_t>(testutil::uniform_int(rng, 0, 5))]);
  return s;
}

SketchState state_of(std::vector<Element> es) { return SketchState{std::move(es)}; }

Element el(const std::string& text, int x) { return Element("text", text, BBox(x, 0, x + 100, 100)); }

void expect_f1_identity(const EvalReport& r) {
  if (r.precision + r.recall > 0)
    EXPECT_DOUBLE_EQ(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall));
  else
    EXPECT_EQ(r.f1, 0.0);
}

}  // namespace

TEST(TextSimilarity, Examples) {
  EXPECT_EQ(text_similarity("Home", "Home"), 1.0);
  EXPECT_EQ(text_similarity("Home", "Hom"), 0.75);
  EXPECT_EQ(text_similarity("abc", "xyz"), 0.0);
  EXPECT_EQ(text_similarity("", ""), 1.0);
  EXPECT_EQ(text_similarity("", "ab"), 0.0);
  // one code point each, not bytes
  EXPECT_EQ(text_similarity("日本", "日"), 0.5);
}

TEST(TextSimilarity, EditDistanceMatchesRecursiveOracle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_u32(rng), b = random_u32(rng);
    const std::vector<char32_t> va(a.begin(), a.end()), vb(b.begin(), b.end());
    EXPECT_EQ(edit_distance(va, vb), levenshtein_oracle(a, b));
    EXPECT_EQ(edit_distance(va, vb), edit_distance(vb, va));
  }
}

TEST(EvalConfig, DefaultThresholds) {
  const EvalConfig cfg;
  EXPECT_EQ(cfg.theta_iou, 0.7);
  EXPECT_EQ(cfg.theta_txt, 0.3);
  EXPECT_FALSE(cfg.dedup_predictions);
  EXPECT_FALSE(cfg.macro);
}

TEST(GreedyMatch, IdenticalStates) {
  const auto s = state_of({el("a", 0), el("b", 200), el("c", 400)});
  const auto st = greedy_match(s, s);
  EXPECT_EQ(st.tp, 3u);
  EXPECT_EQ(st.fp, 0u);
  EXPECT_EQ(st.fn, 0u);
  for (const auto& p : st.pairs) EXPECT_EQ(p.iou, 1.0);
}

TEST(GreedyMatch, EmptyPrediction) {
  const auto st = greedy_match(SketchState{}, state_of({el("a", 0), el("b", 200), el("c", 400)}));
  EXPECT_EQ(st.tp, 0u);
  EXPECT_EQ(st.fp, 0u);
  EXPECT_EQ(st.fn, 3u);
}

TEST(GreedyMatch, TextBranchMatchesShiftedBox) {
  // IoU of [0,0,100,100] with [0,50,100,150] is 1/3
  const auto gt = state_of({Element("button", "Settings", BBox(0, 0, 100, 100))});
  const auto pred = state_of({Element("button", "Settings", BBox(0, 50, 100, 150))});
  const auto st = greedy_match(pred, gt);
  ASSERT_EQ(st.tp, 1u);
  EXPECT_DOUBLE_EQ(st.pairs[0].iou, 1.0 / 3.0);
  EXPECT_EQ(st.pairs[0].text_similarity, 1.0);
}

TEST(GreedyMatch, ThresholdsAreStrict) {
  // normalized edit distance exactly 0.3, IoU exactly 0.5
  const auto gt = state_of({Element("text", "abcdefghij", BBox(0, 0, 100, 100))});
  const auto pred = state_of({Element("text", "xyzdefghij", BBox(0, 0, 50, 100))});
  EvalConfig cfg;
  cfg.theta_iou = 0.5;
  EXPECT_EQ(greedy_match(pred, gt, cfg).tp, 0u);
  cfg.theta_txt = 0.31;
  EXPECT_EQ(greedy_match(pred, gt, cfg).tp, 1u);
}

TEST(GreedyMatch, ConsumesHighestIouFirst) {
  // both predictions overlap gt 1; the exact box is consumed first
  const auto gt = state_of({Element("text", "p", BBox(0, 0, 100, 100)), Element("text", "q", BBox(200, 0, 300, 100))});
  const auto pred = state_of({Element("text", "z1", BBox(200, 0, 300, 100)), Element("text", "z2", BBox(205, 0, 300, 100))});
  EvalConfig cfg;
  cfg.theta_txt = 0.0;
  const auto st = greedy_match(pred, gt, cfg);
  ASSERT_EQ(st.tp, 1u);
  EXPECT_EQ(st.pairs[0].pred, 0u);
  EXPECT_EQ(st.pairs[0].gt, 1u);
  EXPECT_EQ(st.fp, 1u);
  EXPECT_EQ(st.fn, 1u);
}

TEST(GreedyMatch, DedupKeepsFirstOccurrence) {
  const auto gt = state_of({el("Milk", 0)});
  const auto pred = state_of({el("Milk", 500), el("Milk", 0)});
  const auto plain = greedy_match(pred, gt);
  EXPECT_EQ(plain.tp, 1u);
  EXPECT_EQ(plain.pairs[0].pred, 1u);
  EXPECT_EQ(plain.fp, 1u);
  EvalConfig cfg;
  cfg.dedup_predictions = true;
  const auto dedup = greedy_match(pred, gt, cfg);
  EXPECT_EQ(dedup.tp, 1u);
  EXPECT_EQ(dedup.pairs[0].pred, 0u);
  EXPECT_EQ(dedup.fp, 0u);
}

TEST(GreedyMatch, OneToOneAndCountInvariants) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    const auto pred = testutil::random_state(rng, 0, 10);
    const auto gt = testutil::random_state(rng, 0, 10);
    const auto st = greedy_match(pred, gt);
    EXPECT_EQ(st.tp, st.pairs.size());
    EXPECT_EQ(st.fp, pred.size() - st.tp);
    EXPECT_EQ(st.fn, gt.size() - st.tp);
    std::set<std::size_t> ps, gs;
    for (const auto& p : st.pairs) {
      ps.insert(p.pred);
      gs.insert(p.gt);
    }
    EXPECT_EQ(ps.size(), st.tp);
    EXPECT_EQ(gs.size(), st.tp);
  }
}

TEST(GreedyMatch, LooserThresholdsNeverLoseMatches) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    auto gt = testutil::random_state(rng, 0, 8);
    auto pred = gt;
    for (auto& e : pred.elements) {
      const auto& b = e.bbox();
      const int d = testutil::uniform_int(rng, 0, 60);
      e = Element(e.label(), e.text(), BBox(b.x1() + d, b.y1(), b.x2() + d, b.y2()));
    }
    // single-element states keep the greedy order from mattering
    if (gt.size() > 1) {
      gt.elements.erase(gt.elements.begin() + 1, gt.elements.end());
      pred.elements.erase(pred.elements.begin() + 1, pred.elements.end());
    }
    EvalConfig strict, loose;
    strict.theta_iou = 0.9;
    strict.theta_txt = 0.0;
    loose.theta_iou = 0.5;
    loose.theta_txt = 0.0;
    EXPECT_LE(greedy_match(pred, gt, strict).tp, greedy_match(pred, gt, loose).tp);
  }
}

TEST(EvaluateDataset, SelfEvaluationIsAllOnes) {
  std::mt19937_64 rng(21);
  std::vector<EvalSample> samples;
  for (int i = 0; i < 30; ++i) {
    const auto s = testutil::random_state(rng, 1, 8);
    samples.push_back({s, s});
  }
  for (bool macro : {false, true}) {
    EvalConfig cfg;
    cfg.macro = macro;
    const auto r = evaluate_dataset(samples, cfg);
    EXPECT_EQ(r.miou, 1.0);
    EXPECT_EQ(r.text_similarity, 1.0);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 1.0);
  }
}

TEST(EvaluateDataset, AllEmptyPredictions) {
  std::vector<EvalSample> samples = {{SketchState{}, state_of({el("a", 0)})}, {SketchState{}, state_of({el("b", 0)})}};
  const auto r = evaluate_dataset(samples);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.fn, 2u);
}

TEST(EvaluateDataset, TwoSampleHandExample) {
  // A: tp=1 fp=1 fn=0; B: tp=1 fp=0 fn=1
  const std::vector<EvalSample> samples = {
      {state_of({el("a", 0), el("zzzz", 500)}), state_of({el("a", 0)})},
      {state_of({el("b", 0)}), state_of({el("b", 0), el("yyyy", 500)})},
  };
  const auto r = evaluate_dataset(samples);
  EXPECT_EQ(r.tp, 2u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.precision, 2.0 / 3.0);
  EXPECT_EQ(r.recall, 2.0 / 3.0);
  EXPECT_EQ(r.f1, 2.0 / 3.0);

  EvalConfig macro;
  macro.macro = true;
  const auto m = evaluate_dataset(samples, macro);
  EXPECT_EQ(m.precision, 0.75);
  EXPECT_EQ(m.recall, 0.75);
  expect_f1_identity(m);
}

TEST(EvaluateDataset, EmptyDatasetThrows) { EXPECT_THROW(evaluate_dataset({}), EmptyDataset); }

TEST(EvaluateDataset, F1IdentityAndParallelOrderIndependence) {
  std::mt19937_64 rng(34);
  std::vector<EvalSample> samples;
  for (int i = 0; i < 200; ++i) samples.push_back({testutil::random_state(rng, 0, 8), testutil::random_state(rng, 0, 8)});
  for (bool macro : {false, true}) {
    EvalConfig cfg;
    cfg.macro = macro;
    cfg.theta_txt = 0.6;
    const auto serial = evaluate_dataset(samples, cfg, 1);
    const auto parallel = evaluate_dataset(samples, cfg, 4);
    EXPECT_EQ(to_json(serial).dump(), to_json(parallel).dump());
    expect_f1_identity(serial);
    EXPECT_GE(serial.precision, 0.0);
    EXPECT_LE(serial.precision, 1.0);
    EXPECT_GE(serial.recall, 0.0);
    EXPECT_LE(serial.recall, 1.0);
  }
}

TEST(EvaluateDataset, RejectsOutOfRangeThresholds) {
  EvalConfig cfg;
  cfg.theta_iou = 1.5;
  EXPECT_THROW(evaluate_dataset({{SketchState{}, SketchState{}}}, cfg), std::invalid_argument);
}
