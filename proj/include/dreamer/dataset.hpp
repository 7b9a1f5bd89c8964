#pragma once

// Trajectory -> transition records, trajectory-level splits, and the JSONL
// formats for transitions and prediction files.
//
// transitions.jsonl: {"traj_id", "step", "goal", "pre", "action", "post"}
// predictions.jsonl: same keys with "pred" in place of "post"; "pre", "goal"
// and "action" are optional there. Prediction elements may carry
// "label_probs": {label: p}, and a record may carry "gt_token_logprobs": [...]
// (per-byte log-probabilities of the ground-truth serialization).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dreamer/matching.hpp"
#include "dreamer/metrics.hpp"
#include "dreamer/sketch.hpp"

namespace dreamer {

enum class DatasetErrc { schema_error, empty_trajectory, too_few_trajectories, io_error, misaligned };

inline const char* to_string(DatasetErrc c) {
  switch (c) {
    case DatasetErrc::schema_error: return "SchemaError";
    case DatasetErrc::empty_trajectory: return "EmptyTrajectory";
    case DatasetErrc::too_few_trajectories: return "TooFewTrajectories";
    case DatasetErrc::io_error: return "IoError";
    case DatasetErrc::misaligned: return "MisalignedRecords";
  }
  return "?";
}

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  DatasetErrc code() const noexcept { return code_; }

 private:
  DatasetErrc code_;
};

struct TrajectoryStep {
  SketchState state;
  Action action;
  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TrajectoryRecord {
  std::string id;
  std::string goal;
  std::vector<TrajectoryStep> steps;
  SketchState final_state;
  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

struct TransitionRecord {
  std::string traj_id;
  std::size_t step = 0;
  std::string goal;
  SketchState pre;
  Action action;
  SketchState post;
  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

// Trajectories without steps are skipped and their ids appended to `skipped`.
inline std::vector<TransitionRecord> build_transitions(const std::vector<TrajectoryRecord>& trajectories,
                                                       std::vector<std::string>* skipped = nullptr) {
  std::vector<TransitionRecord> out;
  for (const auto& t : trajectories) {
    if (t.steps.empty()) {
      if (skipped != nullptr) skipped->push_back(t.id);
      continue;
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const SketchState& next = i + 1 < t.steps.size() ? t.steps[i + 1].state : t.final_state;
      out.push_back({t.id, i, t.goal, t.steps[i].state, t.steps[i].action, next});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  std::vector<TransitionRecord> train;
  std::vector<TransitionRecord> test;
  std::vector<std::string> test_ids;  // sorted
};

// ceil(fraction * n), kept within [1, n - 1] so both sides are non-empty.
inline std::size_t test_trajectory_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("test fraction must be in (0,1)");
  if (n < 2) throw DatasetError(DatasetErrc::too_few_trajectories, "need at least 2 trajectories, got " + std::to_string(n));
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

// Sorted unique ids are shuffled with a seeded Fisher-Yates pass; the first k
// become the test set. Record order within each side is preserved.
inline Split split_by_trajectory(const std::vector<TransitionRecord>& records, double fraction, std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.traj_id);
  std::vector<std::string> ids(unique.begin(), unique.end());
  const std::size_t k = test_trajectory_count(ids.size(), fraction);

  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[static_cast<std::size_t>(rng() % (i + 1))]);

  Split out;
  out.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.test_ids.begin(), out.test_ids.end());
  const std::set<std::string> test(out.test_ids.begin(), out.test_ids.end());
  for (const auto& r : records) (test.count(r.traj_id) ? out.test : out.train).push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// JSON forms

inline json to_json(const TransitionRecord& r) {
  return {{"traj_id", r.traj_id}, {"step", r.step},         {"goal", r.goal},
          {"pre", to_json(r.pre)}, {"action", to_json(r.action)}, {"post", to_json(r.post)}};
}

namespace detail {

inline const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DatasetError(DatasetErrc::schema_error, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw DatasetError(DatasetErrc::schema_error, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::size_t require_index(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw DatasetError(DatasetErrc::schema_error, std::string("'") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

template <class F>
auto rethrow_as_schema(const char* field, F&& f) {
  try {
    return f();
  } catch (const DatasetError&) {
    throw;
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::schema_error, std::string("'") + field + "': " + e.what());
  }
}

}  // namespace detail

inline TransitionRecord transition_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError(DatasetErrc::schema_error, "record must be an object");
  TransitionRecord r;
  r.traj_id = detail::require_string(j, "traj_id");
  r.step = detail::require_index(j, "step");
  r.goal = detail::require_string(j, "goal");
  r.pre = detail::rethrow_as_schema("pre", [&] { return state_from_json(detail::require(j, "pre")); });
  r.action = detail::rethrow_as_schema("action", [&] { return action_from_json(detail::require(j, "action")); });
  r.post = detail::rethrow_as_schema("post", [&] { return state_from_json(detail::require(j, "post")); });
  return r;
}

inline json to_json(const TrajectoryRecord& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back({{"state", to_json(s.state)}, {"action", to_json(s.action)}});
  return {{"traj_id", t.id}, {"goal", t.goal}, {"steps", std::move(steps)}, {"final", to_json(t.final_state)}};
}

inline TrajectoryRecord trajectory_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError(DatasetErrc::schema_error, "trajectory must be an object");
  TrajectoryRecord t;
  t.id = detail::require_string(j, "traj_id");
  t.goal = detail::require_string(j, "goal");
  const auto& steps = detail::require(j, "steps");
  if (!steps.is_array()) throw DatasetError(DatasetErrc::schema_error, "'steps' must be an array");
  for (const auto& s : steps) {
    TrajectoryStep step;
    step.state = detail::rethrow_as_schema("steps.state", [&] { return state_from_json(detail::require(s, "state")); });
    step.action =
        detail::rethrow_as_schema("steps.action", [&] { return action_from_json(detail::require(s, "action")); });
    t.steps.push_back(std::move(step));
  }
  t.final_state = detail::rethrow_as_schema("final", [&] { return state_from_json(detail::require(j, "final")); });
  return t;
}

struct PredictionRecord {
  std::string traj_id;
  std::size_t step = 0;
  SketchState pred;
  // Per-element label distributions; empty for hard-label predictions.
  std::vector<std::optional<LabelDistribution>> label_probs;
  std::optional<std::vector<double>> gt_token_logprobs;

  // Hard labels are lifted with the given smoothing; explicit distributions are used as-is.
  std::vector<PredictedElement> predicted_elements(const std::vector<std::string>& vocabulary,
                                                   double epsilon = kDefaultLabelSmoothing) const {
    std::vector<PredictedElement> out;
    for (std::size_t i = 0; i < pred.elements.size(); ++i) {
      const auto& e = pred.elements[i];
      if (i < label_probs.size() && label_probs[i]) {
        out.push_back({*label_probs[i], e.text(), e.bbox()});
      } else {
        out.push_back(PredictedElement::lift(e, vocabulary, epsilon));
      }
    }
    return out;
  }
};

inline PredictionRecord prediction_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError(DatasetErrc::schema_error, "record must be an object");
  PredictionRecord r;
  r.traj_id = detail::require_string(j, "traj_id");
  r.step = detail::require_index(j, "step");
  const auto& pred = detail::require(j, "pred");
  r.pred = detail::rethrow_as_schema("pred", [&] { return state_from_json(pred); });
  const json& elems = pred.is_object() ? pred["elements"] : pred;
  for (const auto& e : elems) {
    auto it = e.find("label_probs");
    if (it == e.end()) {
      r.label_probs.emplace_back();
      continue;
    }
    if (!it->is_object()) throw DatasetError(DatasetErrc::schema_error, "'label_probs' must be an object");
    LabelDistribution d;
    for (const auto& [label, p] : it->items()) {
      if (!p.is_number()) throw DatasetError(DatasetErrc::schema_error, "'label_probs' values must be numbers");
      d.probs[label] = p.get<double>();
    }
    detail::rethrow_as_schema("label_probs", [&] {
      d.validate();
      return 0;
    });
    r.label_probs.push_back(std::move(d));
  }
  if (auto it = j.find("gt_token_logprobs"); it != j.end()) {
    if (!it->is_array()) throw DatasetError(DatasetErrc::schema_error, "'gt_token_logprobs' must be an array");
    std::vector<double> lps;
    for (const auto& v : *it) {
      if (!v.is_number()) throw DatasetError(DatasetErrc::schema_error, "'gt_token_logprobs' entries must be numbers");
      lps.push_back(v.get<double>());
    }
    r.gt_token_logprobs = std::move(lps);
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSONL files

// Parses every non-blank line with `parse`; errors carry "path:line".
template <class T, class Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse&& parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrc::io_error, "cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(n);
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DatasetError(DatasetErrc::schema_error, where + ": invalid JSON");
    try {
      out.push_back(parse(j));
    } catch (const DatasetError& e) {
      throw DatasetError(e.code(), where + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TransitionRecord> read_transitions(const std::filesystem::path& path) {
  return read_jsonl<TransitionRecord>(path, transition_from_json);
}

inline std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path) {
  return read_jsonl<TrajectoryRecord>(path, trajectory_from_json);
}

inline std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  return read_jsonl<PredictionRecord>(path, prediction_from_json);
}

template <class Range>
void write_jsonl(const std::filesystem::path& path, const Range& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(DatasetErrc::io_error, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw DatasetError(DatasetErrc::io_error, "write failed: " + path.string());
}

// Pairs predictions with ground truth by (traj_id, step), in ground-truth order.
struct AlignedSample {
  const PredictionRecord* pred;
  const TransitionRecord* gt;
};

inline std::vector<AlignedSample> align(const std::vector<PredictionRecord>& preds,
                                        const std::vector<TransitionRecord>& gts) {
  std::map<std::pair<std::string, std::size_t>, const PredictionRecord*> index;
  for (const auto& p : preds) {
    if (!index.emplace(std::pair{p.traj_id, p.step}, &p).second)
      throw DatasetError(DatasetErrc::misaligned, "duplicate prediction for " + p.traj_id + "#" + std::to_string(p.step));
  }
  std::vector<AlignedSample> out;
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& g : gts) {
    const std::pair key{g.traj_id, g.step};
    if (!seen.insert(key).second)
      throw DatasetError(DatasetErrc::misaligned, "duplicate ground truth for " + g.traj_id + "#" + std::to_string(g.step));
    auto it = index.find(key);
    if (it == index.end())
      throw DatasetError(DatasetErrc::misaligned, "no prediction for " + g.traj_id + "#" + std::to_string(g.step));
    out.push_back({it->second, &g});
  }
  if (out.size() != preds.size()) {
    for (const auto& p : preds)
      if (!seen.count({p.traj_id, p.step}))
        throw DatasetError(DatasetErrc::misaligned, "prediction without ground truth: " + p.traj_id + "#" +
                                                        std::to_string(p.step));
  }
  return out;
}

}  // namespace dreamer
