#pragma once

// Rollout imagination: candidate actions from an Actor, a depth-d prediction
// tree built through a WorldModel, its text rendering, and action selection
// by a Reasoner. Also the closed-loop episode runner.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dreamer/chat_client.hpp"
#include "dreamer/parallel.hpp"
#include "dreamer/prompts.hpp"
#include "dreamer/simulator.hpp"
#include "dreamer/sketch.hpp"
#include "dreamer/worldmodel.hpp"

namespace dreamer {

struct RolloutConfig {
  std::size_t depth = 2;
  std::size_t branching = 3;
  std::size_t max_nodes = 4096;
  std::size_t jobs = 1;  // concurrent actor / world-model calls per level

  void validate() const {
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (branching < 1) throw std::invalid_argument("branching must be >= 1");
    if (max_nodes < 1) throw std::invalid_argument("max_nodes must be >= 1");
  }
};

struct TreeNode {
  Action action;
  SketchState predicted_state;
  std::vector<TreeNode> children;  // ordered by candidate index
  std::size_t depth = 1;
};

struct PredictionTree {
  std::string goal;
  SketchState root_state;
  std::vector<TreeNode> roots;
  std::vector<std::string> pruned;  // one note per dropped branch or failed expansion
  std::size_t depth = 0;
  std::size_t branching = 0;

  std::size_t node_count() const {
    std::size_t n = 0;
    auto count = [&](const auto& self, const TreeNode& node) -> void {
      ++n;
      for (const auto& c : node.children) self(self, c);
    };
    for (const auto& r : roots) count(count, r);
    return n;
  }
};

class ActorFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ActorContext {
  std::string goal;
  SketchState state;
  std::vector<Action> history;          // executed actions, then imagined ones along the path
  std::optional<Action> parent_action;  // set when proposing from a predicted state
  bool predicted = false;
};

// Implementations must tolerate concurrent propose() calls.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual std::vector<Action> propose(const ActorContext& ctx, std::size_t count) = 0;
};

struct ReasonerContext {
  const std::string& goal;
  const SketchState& current_state;
  const PredictionTree& tree;
  const std::string& tree_text;
  std::size_t candidate_count;
};

struct ReasonerReply {
  std::optional<std::size_t> index;  // 1-based; nullopt when the reply was unusable
  std::string rationale;
};

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual ReasonerReply select(const ReasonerContext& ctx) = 0;
};

// Drops invalid and duplicate actions, keeping the first `count`.
inline std::vector<Action> clean_candidates(const std::vector<Action>& proposed, std::size_t count) {
  std::vector<Action> out;
  for (const auto& a : proposed) {
    if (out.size() == count) break;
    try {
      a.validate();
    } catch (const ActionError&) {
      continue;
    }
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree construction

// Expands level by level. Within a level, actor and world-model calls may run
// concurrently, but children are stored by candidate index and the node cap is
// applied in frontier order, so the tree does not depend on scheduling.
// A world-model failure prunes its branch; an actor failure below the root
// leaves the node as a leaf. Both are recorded in `pruned`.
inline PredictionTree build_tree(const std::string& goal, const SketchState& state, WorldModel& wm, Actor& actor,
                                 const RolloutConfig& cfg, const std::vector<Action>& history = {}) {
  cfg.validate();
  PredictionTree tree;
  tree.goal = goal;
  tree.root_state = state;
  tree.depth = cfg.depth;
  tree.branching = cfg.branching;

  std::vector<Action> root_actions;
  try {
    root_actions = clean_candidates(actor.propose({goal, state, history, std::nullopt, false}, cfg.branching),
                                    cfg.branching);
  } catch (const std::exception& e) {
    throw ActorFailure(std::string("root proposal failed: ") + e.what());
  }

  struct Pending {
    const SketchState* parent_state;
    Action action;
    std::size_t depth;
    std::optional<SketchState> predicted;
    std::string error;
  };
  auto predict_all = [&](std::vector<Pending>& pending) {
    parallel_for(pending.size(), cfg.jobs, [&](std::size_t i) {
      try {
        pending[i].predicted = wm.predict(goal, *pending[i].parent_state, pending[i].action);
      } catch (const std::exception& e) {
        pending[i].error = e.what();
      }
    });
  };

  std::size_t budget = cfg.max_nodes;
  std::vector<Pending> pending;
  for (auto& a : root_actions) {
    if (budget == 0) break;
    --budget;
    pending.push_back({&tree.root_state, std::move(a), 1, std::nullopt, {}});
  }
  predict_all(pending);
  for (auto& p : pending) {
    if (!p.predicted) {
      tree.pruned.push_back("depth 1 " + action_str(p.action) + ": " + p.error);
      continue;
    }
    tree.roots.push_back({std::move(p.action), std::move(*p.predicted), {}, 1});
  }

  struct Frontier {
    TreeNode* node;
    std::vector<Action> path;
  };
  std::vector<Frontier> frontier;
  for (auto& r : tree.roots) {
    auto path = history;
    path.push_back(r.action);
    frontier.push_back({&r, std::move(path)});
  }

  for (std::size_t depth = 2; depth <= cfg.depth && !frontier.empty() && budget > 0; ++depth) {
    std::vector<std::vector<Action>> proposals(frontier.size());
    std::vector<std::string> failures(frontier.size());
    parallel_for(frontier.size(), cfg.jobs, [&](std::size_t i) {
      const TreeNode& node = *frontier[i].node;
      if (node.action.kind == ActionKind::terminate) return;
      try {
        proposals[i] = clean_candidates(
            actor.propose({goal, node.predicted_state, frontier[i].path, node.action, true}, cfg.branching),
            cfg.branching);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });

    std::vector<Pending> level;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (!failures[i].empty())
        tree.pruned.push_back("depth " + std::to_string(depth) + " actor after " + action_str(frontier[i].node->action) +
                              ": " + failures[i]);
      for (auto& a : proposals[i]) {
        if (budget == 0) break;
        --budget;
        level.push_back({&frontier[i].node->predicted_state, std::move(a), depth, std::nullopt, {}});
        owner.push_back(i);
      }
    }
    predict_all(level);

    for (std::size_t k = 0; k < level.size(); ++k) {
      auto& p = level[k];
      if (!p.predicted) {
        tree.pruned.push_back("depth " + std::to_string(depth) + " " + action_str(p.action) + ": " + p.error);
        continue;
      }
      frontier[owner[k]].node->children.push_back({std::move(p.action), std::move(*p.predicted), {}, depth});
    }
    std::vector<Frontier> next;
    for (auto& f : frontier) {
      for (auto& child : f.node->children) {
        auto path = f.path;
        path.push_back(child.action);
        next.push_back({&child, std::move(path)});
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Tree text

struct TreeTextOptions {
  bool full_states = false;    // list every predicted element line
  std::size_t max_texts = 8;   // per list in the summary
  std::size_t max_text_len = 40;
};

namespace detail {

inline std::string clip(const std::string& s, std::size_t max_len) {
  const auto cps = utf8::decode(s);
  if (cps.size() <= max_len) return s;
  return utf8::encode(std::vector<char32_t>(cps.begin(), cps.begin() + static_cast<std::ptrdiff_t>(max_len))) + "...";
}

inline std::string quoted_list(const std::vector<std::string>& texts, const TreeTextOptions& opt) {
  std::string out;
  const std::size_t shown = std::min(texts.size(), opt.max_texts);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += ", ";
    out += json(clip(texts[i], opt.max_text_len)).dump();
  }
  if (texts.size() > shown) out += ", ...(+" + std::to_string(texts.size() - shown) + ")";
  return out;
}

inline std::vector<std::string> nonempty_texts(const SketchState& s) {
  std::vector<std::string> out;
  for (const auto& e : s.elements)
    if (!e.text().empty()) out.push_back(e.text());
  return out;
}

// Multiset difference a \ b, preserving the order of a.
inline std::vector<std::string> text_difference(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, int> remaining;
  for (const auto& t : b) ++remaining[t];
  std::vector<std::string> out;
  for (const auto& t : a) {
    if (remaining[t] > 0) {
      --remaining[t];
    } else {
      out.push_back(t);
    }
  }
  return out;
}

inline void render_node(std::string& out, const TreeNode& node, const std::string& label, const SketchState& current,
                        const TreeTextOptions& opt) {
  const std::string indent(2 * (node.depth - 1), ' ');
  out += indent + "[" + label + "] " + action_str(node.action) + "\n";
  const auto texts = nonempty_texts(node.predicted_state);
  const auto before = nonempty_texts(current);
  const auto added = text_difference(texts, before);
  const auto removed = text_difference(before, texts);
  out += indent + "  predicted: " + std::to_string(node.predicted_state.size()) + " elements";
  if (!texts.empty()) out += "; texts: " + quoted_list(texts, opt);
  if (added.empty() && removed.empty()) {
    out += "; unchanged from current screen";
  } else {
    if (!added.empty()) out += "; added: " + quoted_list(added, opt);
    if (!removed.empty()) out += "; removed: " + quoted_list(removed, opt);
  }
  out += "\n";
  if (opt.full_states) {
    for (const auto& e : node.predicted_state.elements) out += indent + "    " + serialize_element(e) + "\n";
  }
  for (std::size_t i = 0; i < node.children.size(); ++i)
    render_node(out, node.children[i], label + "." + std::to_string(i + 1), current, opt);
}

}  // namespace detail

inline constexpr std::string_view kTreeTextVersion = "v1";

// Indented text of the tree; diffs are taken against the real current screen.
inline std::string serialize_tree(const PredictionTree& tree, const TreeTextOptions& opt = {}) {
  std::string out = "PREDICTION TREE " + std::string(kTreeTextVersion) + " (depth=" + std::to_string(tree.depth) +
                    ", branching=" + std::to_string(tree.branching) + ", nodes=" + std::to_string(tree.node_count()) +
                    ")\n";
  for (std::size_t i = 0; i < tree.roots.size(); ++i)
    detail::render_node(out, tree.roots[i], std::to_string(i + 1), tree.root_state, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Selection

struct Selection {
  Action action;
  std::size_t index = 1;  // 1-based among level-1 candidates
  std::string rationale;
  bool fallback = false;  // reasoner reply unusable; candidate 1 taken
};

inline Selection select_action(Reasoner& reasoner, const std::string& goal, const SketchState& real_state,
                               const PredictionTree& tree, const std::string& tree_text) {
  if (tree.roots.empty()) throw std::invalid_argument("select_action needs at least one level-1 candidate");
  const std::size_t n = tree.roots.size();
  ReasonerReply reply;
  try {
    reply = reasoner.select({goal, real_state, tree, tree_text, n});
  } catch (const std::exception& e) {
    reply = {std::nullopt, std::string("reasoner failed: ") + e.what()};
  }
  if (!reply.index || *reply.index < 1 || *reply.index > n)
    return {tree.roots.front().action, 1, reply.rationale, true};
  return {tree.roots[*reply.index - 1].action, *reply.index, reply.rationale, false};
}

// ---------------------------------------------------------------------------
// Built-in heuristic backends

namespace heuristics {

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::set<std::string> goal_tokens(std::string_view goal) {
  static const std::set<std::string> stop = {"a", "an", "and", "for", "in", "my", "of", "please", "the", "then", "to", "with"};
  std::set<std::string> out;
  for (auto& t : tokenize(goal))
    if (!stop.count(t)) out.insert(std::move(t));
  return out;
}

inline std::size_t overlap(const std::set<std::string>& goal, std::string_view text) {
  std::set<std::string> seen;
  for (auto& t : tokenize(text))
    if (goal.count(t)) seen.insert(std::move(t));
  return seen.size();
}

// Fraction of goal tokens present anywhere in the state's texts.
inline double coverage(const std::set<std::string>& goal, const SketchState& s) {
  if (goal.empty()) return 0.0;
  std::set<std::string> found;
  for (const auto& e : s.elements)
    for (auto& t : tokenize(e.text()))
      if (goal.count(t)) found.insert(std::move(t));
  return static_cast<double>(found.size()) / static_cast<double>(goal.size());
}

}  // namespace heuristics

// Clicks elements ranked by goal-token overlap with their text, ties broken
// by reading order (top-to-bottom, then left-to-right, then position).
class HeuristicActor final : public Actor {
 public:
  HeuristicActor() = default;
  // Restricts candidates to these labels; empty means every labelled element.
  explicit HeuristicActor(std::set<std::string> clickable_labels) : clickable_(std::move(clickable_labels)) {}

  std::vector<Action> propose(const ActorContext& ctx, std::size_t count) override {
    const auto goal = heuristics::goal_tokens(ctx.goal);
    struct Ranked {
      std::size_t score;
      int y, x;
      std::size_t index;
    };
    std::vector<Ranked> ranked;
    const auto& elems = ctx.state.elements;
    for (std::size_t i = 0; i < elems.size(); ++i) {
      const auto& e = elems[i];
      if (e.text().empty()) continue;
      if (!clickable_.empty() && !clickable_.count(e.label())) continue;
      ranked.push_back({heuristics::overlap(goal, e.text()), e.bbox().y1(), e.bbox().x1(), i});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return std::tie(b.score, a.y, a.x, a.index) < std::tie(a.score, b.y, b.x, b.index);
    });
    std::vector<Action> out;
    for (const auto& r : ranked) {
      if (out.size() == count) break;
      const auto [cx, cy] = elems[r.index].bbox().center();
      auto a = Action::click(cx, cy);
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
    }
    return out;
  }

 private:
  std::set<std::string> clickable_;
};

// Scores each level-1 candidate by the best goal-token coverage among the
// leaves of its subtree; ties go to the lower candidate index.
class HeuristicReasoner final : public Reasoner {
 public:
  ReasonerReply select(const ReasonerContext& ctx) override {
    const auto goal = heuristics::goal_tokens(ctx.goal);
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < ctx.tree.roots.size(); ++i) {
      const double s = leaf_score(goal, ctx.tree.roots[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "best leaf goal coverage %.3f", best_score);
    return {best + 1, buf};
  }

  static double leaf_score(const std::set<std::string>& goal, const TreeNode& node) {
    if (node.children.empty()) return heuristics::coverage(goal, node.predicted_state);
    double best = 0.0;
    for (const auto& c : node.children) best = std::max(best, leaf_score(goal, c));
    return best;
  }
};

// ---------------------------------------------------------------------------
// Remote backends

// Extracts one JSON action per line; lines without a parsable object are ignored.
inline std::vector<Action> parse_action_lines(std::string_view reply) {
  std::vector<Action> out;
  while (!reply.empty()) {
    const auto nl = reply.find('\n');
    const auto line = reply.substr(0, nl);
    reply = nl == std::string_view::npos ? std::string_view{} : reply.substr(nl + 1);
    const auto open = line.find('{');
    const auto close = line.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) continue;
    const auto j = json::parse(line.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded()) continue;
    try {
      out.push_back(action_from_json(j));
    } catch (const ActionError&) {
    }
  }
  return out;
}

inline std::optional<std::size_t> parse_selection(const std::string& reply, std::string* reason = nullptr) {
  static const std::regex number(R"(Action\s*Number\s*:\s*\[?\s*(\d+))", std::regex::icase);
  static const std::regex why(R"(Reason\s*:\s*\[?([^\n\]]*))", std::regex::icase);
  std::smatch m;
  if (reason != nullptr && std::regex_search(reply, m, why)) *reason = m[1].str();
  if (!std::regex_search(reply, m, number)) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoul(m[1].str()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::string history_text(const std::vector<Action>& history) {
  if (history.empty()) return "(none)";
  std::string out;
  for (const auto& a : history) out += (out.empty() ? "" : "; ") + action_str(a);
  return out;
}

class RemoteActor final : public Actor {
 public:
  explicit RemoteActor(RemoteModelConfig cfg) : client_(std::move(cfg)) {}

  static std::string render_prompt(const ActorContext& ctx, std::size_t count) {
    const std::string k = std::to_string(count);
    if (ctx.parent_action) {
      return prompts::fill(prompts::kActorFollowUp, {{"GOAL", ctx.goal},
                                                     {"SUBTASK", ctx.goal},
                                                     {"PARENT_ACTION", action_str(*ctx.parent_action)},
                                                     {"PREDICTED_STATE", serialize_state(ctx.state)},
                                                     {"K", k}});
    }
    return prompts::fill(prompts::kActorRoot, {{"GOAL", ctx.goal},
                                               {"SUBTASK", ctx.goal},
                                               {"HISTORY", history_text(ctx.history)},
                                               {"CURRENT_STATE", serialize_state(ctx.state)},
                                               {"K", k}});
  }

  std::vector<Action> propose(const ActorContext& ctx, std::size_t count) override {
    auto actions = parse_action_lines(client_.complete({{"user", render_prompt(ctx, count)}}));
    if (actions.empty()) throw ActorFailure("model reply contained no valid action");
    return actions;
  }

 private:
  ChatClient client_;
};

class RemoteReasoner final : public Reasoner {
 public:
  explicit RemoteReasoner(RemoteModelConfig cfg) : client_(std::move(cfg)) {}

  static std::string render_prompt(const ReasonerContext& ctx) {
    return prompts::fill(prompts::kReasoner, {{"GOAL", ctx.goal},
                                              {"SUBTASK", ctx.goal},
                                              {"TREE_TEXT", ctx.tree_text},
                                              {"N", std::to_string(ctx.candidate_count)}});
  }

  ReasonerReply select(const ReasonerContext& ctx) override {
    const auto reply = client_.complete({{"user", render_prompt(ctx)}});
    ReasonerReply out;
    out.index = parse_selection(reply, &out.rationale);
    return out;
  }

 private:
  ChatClient client_;
};

// ---------------------------------------------------------------------------
// Episodes

enum class AgentMode { reactive, lookahead };

inline const char* to_string(AgentMode m) { return m == AgentMode::reactive ? "reactive" : "lookahead"; }

struct EpisodeBackends {
  Actor& actor;
  Reasoner* reasoner = nullptr;  // lookahead only
  WorldModel* world_model = nullptr;  // lookahead only
};

struct StepRecord {
  Action action;
  std::size_t candidate_index = 1;
  std::size_t tree_nodes = 0;
  std::string rationale;
};

struct EpisodeResult {
  std::string task_id;
  AgentMode mode = AgentMode::reactive;
  bool success = false;
  std::size_t steps = 0;
  std::vector<StepRecord> trajectory;
  std::vector<SketchState> states;  // states[i] precedes trajectory[i]; one extra final state
  std::size_t reasoner_fallbacks = 0;
  std::size_t pruned_branches = 0;
  std::vector<std::string> notes;
};

inline EpisodeResult run_episode(const sim::TaskSpec& task, const sim::AppSpec& spec, AgentMode mode,
                                 EpisodeBackends backends, const RolloutConfig& cfg) {
  cfg.validate();
  if (mode == AgentMode::lookahead && (backends.reasoner == nullptr || backends.world_model == nullptr))
    throw std::invalid_argument("lookahead mode needs a reasoner and a world model");

  EpisodeResult result;
  result.task_id = task.id;
  result.mode = mode;
  sim::EnvState env = sim::reset(spec, task);
  SketchState state = sim::render_sketch(env, spec);
  result.states.push_back(state);
  std::vector<Action> history;
  result.success = sim::check_success(env, spec, task);

  while (!result.success && !env.done) {
    StepRecord rec;
    try {
      if (mode == AgentMode::reactive) {
        auto actions = clean_candidates(backends.actor.propose({task.goal, state, history, std::nullopt, false}, 1), 1);
        if (actions.empty()) {
          result.notes.push_back("step " + std::to_string(result.steps) + ": actor proposed nothing");
          break;
        }
        rec.action = actions.front();
      } else {
        backends.world_model->ground(env);
        const auto tree = build_tree(task.goal, state, *backends.world_model, backends.actor, cfg, history);
        result.pruned_branches += tree.pruned.size();
        rec.tree_nodes = tree.node_count();
        if (tree.roots.empty()) {
          result.notes.push_back("step " + std::to_string(result.steps) + ": every branch was pruned");
          break;
        }
        const auto sel = select_action(*backends.reasoner, task.goal, state, tree, serialize_tree(tree));
        if (sel.fallback) {
          ++result.reasoner_fallbacks;
          result.notes.push_back("step " + std::to_string(result.steps) + ": reasoner reply unusable, took candidate 1");
        }
        rec.action = sel.action;
        rec.candidate_index = sel.index;
        rec.rationale = sel.rationale;
      }
    } catch (const std::exception& e) {
      result.notes.push_back("step " + std::to_string(result.steps) + ": " + e.what());
      break;
    }

    auto r = sim::step(env, spec, rec.action);
    env = std::move(r.env);
    state = std::move(r.sketch);
    history.push_back(rec.action);
    result.trajectory.push_back(std::move(rec));
    result.states.push_back(state);
    ++result.steps;
    result.success = sim::check_success(env, spec, task);
    if (history.back().kind == ActionKind::terminate) break;
  }
  return result;
}

inline json to_json(const EpisodeResult& r) {
  json actions = json::array();
  for (const auto& s : r.trajectory) {
    json a = {{"action", to_json(s.action)}, {"candidate", s.candidate_index}};
    if (s.tree_nodes > 0) a["tree_nodes"] = s.tree_nodes;
    if (!s.rationale.empty()) a["rationale"] = s.rationale;
    actions.push_back(std::move(a));
  }
  return {{"task_id", r.task_id},
          {"mode", to_string(r.mode)},
          {"success", r.success},
          {"steps", r.steps},
          {"trajectory", std::move(actions)},
          {"reasoner_fallbacks", r.reasoner_fallbacks},
          {"pruned_branches", r.pruned_branches},
          {"notes", r.notes}};
}

}  // namespace dreamer
