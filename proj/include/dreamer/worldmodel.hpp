#pragma once

// World-model backends predicting the next sketch from (goal, state, action):
// the simulator oracle, a seeded noisy wrapper, and a remote chat model.

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "dreamer/chat_client.hpp"
#include "dreamer/metrics.hpp"
#include "dreamer/prompts.hpp"
#include "dreamer/simulator.hpp"
#include "dreamer/sketch.hpp"
#include "dreamer/utf8.hpp"

namespace dreamer {

// Implementations must tolerate concurrent predict() calls.
class WorldModel {
 public:
  virtual ~WorldModel() = default;
  virtual SketchState predict(const std::string& goal, const SketchState& state, const Action& action) = 0;
  // Announces the real environment state before each planning step. Only
  // simulator-backed models use it.
  virtual void ground(const sim::EnvState&) {}
};

// ---------------------------------------------------------------------------
// Oracle

struct OracleOutcome {
  SketchState state;
  bool mapped = true;  // false: no transition matched, state unchanged
};

// The exact post-action sketch, ignoring the episode step budget.
inline OracleOutcome oracle_predict(const sim::AppSpec& spec, const sim::EnvState& env, const Action& action) {
  sim::EnvState free_env = env;
  free_env.done = false;
  free_env.max_steps = 0;
  auto r = sim::step(free_env, spec, action);
  return {std::move(r.sketch), r.matched};
}

// Simulator-backed world model. Incoming sketches are resolved back to
// environment states through a cache of every state it has rendered; a sketch
// not in the cache resolves to the cached state whose rendering matches it best
// (greedy-match F1 >= min_resolution_f1), otherwise UnknownScreen.
class OracleWorldModel final : public WorldModel {
 public:
  explicit OracleWorldModel(const sim::AppSpec& spec, double min_resolution_f1 = 0.5)
      : spec_(spec), min_f1_(min_resolution_f1) {}

  void ground(const sim::EnvState& env) override {
    std::lock_guard lock(mutex_);
    cache_[serialize_state(sim::render_sketch(env, spec_))] = env;
  }

  SketchState predict(const std::string&, const SketchState& state, const Action& action) override {
    const sim::EnvState env = resolve(state);
    auto sim_env = env;
    sim_env.done = false;
    sim_env.max_steps = 0;
    auto r = sim::step(sim_env, spec_, action);
    if (!r.matched) ++unmapped_;
    std::lock_guard lock(mutex_);
    cache_.try_emplace(serialize_state(r.sketch), r.env);
    return std::move(r.sketch);
  }

  std::size_t unmapped_count() const noexcept { return unmapped_.load(); }

  sim::EnvState resolve(const SketchState& state) const {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(serialize_state(state)); it != cache_.end()) return it->second;
    const sim::EnvState* best = nullptr;
    double best_f1 = -1.0;
    for (const auto& [key, env] : cache_) {
      const auto stats = greedy_match(state, sim::render_sketch(env, spec_));
      const double p = safe_ratio(static_cast<double>(stats.tp), static_cast<double>(stats.tp + stats.fp));
      const double r = safe_ratio(static_cast<double>(stats.tp), static_cast<double>(stats.tp + stats.fn));
      const double f1 = f1_score(p, r);
      if (f1 > best_f1) {
        best_f1 = f1;
        best = &env;
      }
    }
    if (best == nullptr || best_f1 < min_f1_)
      throw sim::SimError(sim::SimErrc::unknown_screen, "sketch matches no known screen of '" + spec_.name + "'");
    return *best;
  }

 private:
  const sim::AppSpec& spec_;
  double min_f1_;
  mutable std::mutex mutex_;
  std::map<std::string, sim::EnvState> cache_;
  std::atomic<std::size_t> unmapped_{0};
};

// ---------------------------------------------------------------------------
// Noise

struct NoiseConfig {
  int bbox_jitter_px = 0;
  double element_drop_prob = 0.0;
  double element_dup_prob = 0.0;
  double text_typo_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (bbox_jitter_px < 0) throw std::invalid_argument("bbox_jitter_px must be >= 0");
    for (double p : {element_drop_prob, element_dup_prob, text_typo_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise probabilities must be in [0,1]");
  }

  bool disabled() const noexcept {
    return bbox_jitter_px == 0 && element_drop_prob == 0.0 && element_dup_prob == 0.0 && text_typo_prob == 0.0;
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// mt19937_64 output is fixed by the standard; the conversions below are ours
// so perturbations are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return p > 0.0 && uniform() < p; }
  int between(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detail

// Applies drop / typo / jitter / duplicate perturbations. The random stream is
// derived from (seed, stream_key), so equal inputs give equal outputs no
// matter the call order.
inline SketchState perturb(const SketchState& s, const NoiseConfig& noise, std::string_view stream_key) {
  noise.validate();
  if (noise.disabled()) return s;
  detail::Rng rng(detail::fnv1a(stream_key, noise.seed ^ 0x9e3779b97f4a7c15ULL));
  SketchState out;
  out.screen_width = s.screen_width;
  out.screen_height = s.screen_height;
  const int max_x = s.screen_width > 0 ? s.screen_width : INT32_MAX;
  const int max_y = s.screen_height > 0 ? s.screen_height : INT32_MAX;

  auto jitter = [&](const BBox& b) {
    if (noise.bbox_jitter_px == 0) return b;
    const int j = noise.bbox_jitter_px;
    int c[4] = {b.x1() + rng.between(-j, j), b.y1() + rng.between(-j, j), b.x2() + rng.between(-j, j),
                b.y2() + rng.between(-j, j)};
    c[0] = std::clamp(c[0], 0, max_x);
    c[2] = std::clamp(c[2], 0, max_x);
    c[1] = std::clamp(c[1], 0, max_y);
    c[3] = std::clamp(c[3], 0, max_y);
    if (c[0] > c[2]) std::swap(c[0], c[2]);
    if (c[1] > c[3]) std::swap(c[1], c[3]);
    return BBox(c[0], c[1], c[2], c[3]);
  };
  auto typo = [&](const std::string& text) {
    if (text.empty() || !rng.bernoulli(noise.text_typo_prob)) return text;
    auto cps = utf8::decode(text);
    cps[rng.index(cps.size())] = static_cast<char32_t>('a' + rng.between(0, 25));
    return utf8::encode(cps);
  };

  for (const auto& e : s.elements) {
    if (rng.bernoulli(noise.element_drop_prob)) continue;
    const std::string text = typo(e.text());
    out.elements.emplace_back(e.label(), text, jitter(e.bbox()));
    if (rng.bernoulli(noise.element_dup_prob)) out.elements.emplace_back(e.label(), text, jitter(e.bbox()));
  }
  return out;
}

class NoisyWorldModel final : public WorldModel {
 public:
  NoisyWorldModel(WorldModel& inner, NoiseConfig noise) : inner_(inner), noise_(noise) { noise_.validate(); }

  SketchState predict(const std::string& goal, const SketchState& state, const Action& action) override {
    auto clean = inner_.predict(goal, state, action);
    if (noise_.disabled()) return clean;
    const std::string key = std::to_string(epoch_.load()) + '\x1f' + goal + '\x1f' + serialize_state(state) + '\x1f' +
                            action_str(action);
    return perturb(clean, noise_, key);
  }

  // The episode step joins the stream key, so each planning step draws fresh
  // noise while a given (step, goal, state, action) stays reproducible.
  void ground(const sim::EnvState& env) override {
    epoch_ = env.steps;
    inner_.ground(env);
  }

 private:
  WorldModel& inner_;
  NoiseConfig noise_;
  std::atomic<std::size_t> epoch_{0};
};

// ---------------------------------------------------------------------------
// Remote

inline std::string render_wm_prompt(const std::string& goal, const SketchState& state, const Action& action) {
  return prompts::fill(prompts::kWorldModel,
                       {{"GOAL", goal}, {"CURRENT_STATE", serialize_state(state)}, {"ACTION", action_str(action)}});
}

struct RemotePrediction {
  SketchState state;
  std::size_t malformed_lines = 0;
};

// Tolerant parse of a model reply; ParseFailure when no element line survives.
inline RemotePrediction parse_model_reply(std::string_view reply) {
  auto parsed = parse_state_tolerant(reply);
  if (parsed.state.empty())
    throw RemoteError(RemoteErrc::parse_failure,
                      "no valid element lines (" + std::to_string(parsed.malformed) + " malformed)");
  return {std::move(parsed.state), parsed.malformed};
}

inline RemotePrediction remote_predict(const ChatClient& client, const std::string& goal, const SketchState& state,
                                       const Action& action) {
  const auto reply = client.complete({{"user", render_wm_prompt(goal, state, action)}});
  auto out = parse_model_reply(reply);
  out.state.screen_width = state.screen_width;
  out.state.screen_height = state.screen_height;
  return out;
}

class RemoteWorldModel final : public WorldModel {
 public:
  explicit RemoteWorldModel(RemoteModelConfig cfg) : client_(std::move(cfg)) {}

  SketchState predict(const std::string& goal, const SketchState& state, const Action& action) override {
    auto r = remote_predict(client_, goal, state, action);
    malformed_ += r.malformed_lines;
    return std::move(r.state);
  }

  std::size_t malformed_lines() const noexcept { return malformed_.load(); }

 private:
  ChatClient client_;
  std::atomic<std::size_t> malformed_{0};
};

}  // namespace dreamer
