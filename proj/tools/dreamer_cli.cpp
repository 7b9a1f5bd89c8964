// dreamer: evaluation, loss, planning, simulation and dataset utilities.
//
// Exit codes: 0 success, 1 runtime failure, 2 input or schema error.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dreamer/dreamer.hpp"

namespace fs = std::filesystem;
using namespace dreamer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

// Input problems that map to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string log_level = "info";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string format = "table";
};

void add_format(CLI::App* cmd, GlobalOptions& g) {
  cmd->add_option("--format", g.format, "Stdout format")->check(CLI::IsMember({"table", "json"}));
}

void write_text_file(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt_num(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Left-aligned first column, right-aligned rest.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], utf8::length(r[i]));
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string pad(width[i] - utf8::length(r[i]), ' ');
      if (i) line += "  ";
      line += i == 0 ? r[i] + pad : pad + r[i];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Remote / noise / rollout flags

struct RemoteFlags {
  RemoteModelConfig cfg;
  void add(CLI::App* cmd) {
    cmd->add_option("--endpoint", cfg.endpoint, "Chat-completion endpoint URL");
    cmd->add_option("--model", cfg.model, "Remote model identifier");
    cmd->add_option("--api-key-env", cfg.api_key_env, "Environment variable holding the API key");
    cmd->add_option("--timeout", cfg.timeout_seconds, "Request timeout in seconds");
    cmd->add_option("--max-retries", cfg.max_retries, "Retries for network errors, 5xx and 429");
    cmd->add_option("--temperature", cfg.temperature, "Sampling temperature");
    cmd->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent request bound");
  }
};

struct NoiseFlags {
  NoiseConfig cfg;
  void add(CLI::App* cmd) {
    cmd->add_option("--noise-jitter", cfg.bbox_jitter_px, "Noisy world model: max bbox corner jitter (px)");
    cmd->add_option("--noise-drop", cfg.element_drop_prob, "Noisy world model: element drop probability");
    cmd->add_option("--noise-dup", cfg.element_dup_prob, "Noisy world model: element duplicate probability");
    cmd->add_option("--noise-typo", cfg.text_typo_prob, "Noisy world model: text typo probability");
  }
};

struct PlanFlags {
  RolloutConfig rollout;
  std::string wm = "oracle";
  std::string actor = "heuristic";
  std::string reasoner = "heuristic";
  bool full_states = false;
  void add(CLI::App* cmd) {
    cmd->add_option("--depth,-d", rollout.depth, "Rollout depth d")->check(CLI::PositiveNumber);
    cmd->add_option("--branch,-m", rollout.branching, "Branching factor M")->check(CLI::PositiveNumber);
    cmd->add_option("--max-nodes", rollout.max_nodes, "Node cap per prediction tree")->check(CLI::PositiveNumber);
    cmd->add_option("--wm", wm, "World model backend")->check(CLI::IsMember({"oracle", "noisy", "remote"}));
    cmd->add_option("--actor", actor, "Candidate action source")->check(CLI::IsMember({"heuristic", "remote"}));
    cmd->add_option("--reasoner", reasoner, "Action selector")->check(CLI::IsMember({"heuristic", "remote"}));
    cmd->add_flag("--full-states", full_states, "Include full predicted element lists in the tree text");
  }
};

std::unique_ptr<Actor> make_actor(const PlanFlags& f, const RemoteFlags& r) {
  if (f.actor == "remote") return std::make_unique<RemoteActor>(r.cfg);
  return std::make_unique<HeuristicActor>();
}

std::unique_ptr<Reasoner> make_reasoner(const PlanFlags& f, const RemoteFlags& r) {
  if (f.reasoner == "remote") return std::make_unique<RemoteReasoner>(r.cfg);
  return std::make_unique<HeuristicReasoner>();
}

// World model stack for one app. The noisy backend wraps the oracle.
struct WorldModelStack {
  std::unique_ptr<OracleWorldModel> oracle;
  std::unique_ptr<WorldModel> outer;
  WorldModel& get() { return outer ? *outer : static_cast<WorldModel&>(*oracle); }
};

WorldModelStack make_world_model(const std::string& kind, const sim::AppSpec* spec, const NoiseConfig& noise,
                                 const RemoteFlags& r) {
  WorldModelStack s;
  if (kind == "remote") {
    s.outer = std::make_unique<RemoteWorldModel>(r.cfg);
    return s;
  }
  if (spec == nullptr) throw InputError("--wm " + kind + " needs an app definition (--app)");
  s.oracle = std::make_unique<OracleWorldModel>(*spec);
  if (kind == "noisy") s.outer = std::make_unique<NoisyWorldModel>(*s.oracle, noise);
  return s;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred, gt, output = "eval_report.json";
  EvalConfig cfg;
};

std::vector<EvalSample> load_eval_samples(const std::string& pred_path, const std::string& gt_path) {
  const auto preds = read_predictions(pred_path);
  const auto gts = read_transitions(gt_path);
  std::vector<EvalSample> samples;
  for (const auto& a : align(preds, gts)) samples.push_back({a.pred->pred, a.gt->post});
  return samples;
}

std::string eval_table(const EvalReport& r) {
  return render_table({{"metric", "value"},
                       {"mIoU", fmt_num(r.miou)},
                       {"text_similarity", fmt_num(r.text_similarity)},
                       {"precision", fmt_num(r.precision)},
                       {"recall", fmt_num(r.recall)},
                       {"f1", fmt_num(r.f1)},
                       {"samples", std::to_string(r.sample_count)},
                       {"tp/fp/fn", std::to_string(r.tp) + "/" + std::to_string(r.fp) + "/" + std::to_string(r.fn)},
                       {"averaging", r.macro ? "macro" : "micro"}});
}

int run_eval(const EvalArgs& a, const GlobalOptions& g) {
  const auto samples = load_eval_samples(a.pred, a.gt);
  if (samples.empty()) throw InputError("no samples in " + a.gt);
  const auto report = evaluate_dataset(samples, a.cfg, g.jobs);
  const auto j = to_json(report).dump(2) + "\n";
  write_text_file(a.output, j);
  std::cout << (g.format == "json" ? j : eval_table(report));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// loss

struct LossArgs {
  std::string pred, gt, output;
  CostWeights w;
  double unmatched_penalty = -1.0;
  double label_smoothing = kDefaultLabelSmoothing;
};

int run_loss(LossArgs a, const GlobalOptions& g) {
  if (a.unmatched_penalty >= 0.0) a.w.unmatched_penalty = a.unmatched_penalty;
  a.w.label_nll_cap = label_nll_cap(a.label_smoothing, default_label_vocabulary().size());
  a.w.validate();
  const auto preds = read_predictions(a.pred);
  const auto gts = read_transitions(a.gt);
  const auto aligned = align(preds, gts);
  if (aligned.empty()) throw InputError("no samples in " + a.gt);

  std::vector<LossBreakdown> results(aligned.size());
  std::atomic<std::size_t> missing_ce{0};
  parallel_for(aligned.size(), g.jobs, [&](std::size_t i) {
    const auto& p = *aligned[i].pred;
    const auto pred = p.predicted_elements(default_label_vocabulary(), a.label_smoothing);
    if (p.gt_token_logprobs) {
      RecordedLogProbs provider(*p.gt_token_logprobs);
      results[i] = total_loss(pred, aligned[i].gt->post, a.w, &provider);
    } else {
      CostWeights w = a.w;
      if (w.lambda_ce > 0.0) ++missing_ce;
      w.lambda_ce = 0.0;
      results[i] = total_loss(pred, aligned[i].gt->post, w);
    }
  });
  if (missing_ce > 0)
    spdlog::warn("{} record(s) lack gt_token_logprobs; their CE term is omitted (lambda_ce treated as 0)",
                 missing_ce.load());

  auto row_json = [](const LossBreakdown& l) {
    return json{{"match_loss", l.match_loss}, {"bbox_term", l.bbox_term}, {"label_term", l.label_term},
                {"text_term", l.text_term},   {"ce_loss", l.ce_loss},     {"total", l.total},
                {"matched_pairs", l.matching.pairs.size()}, {"degenerate", l.degenerate},
                {"ce_available", l.ce_available}};
  };
  std::string lines;
  LossBreakdown mean;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto j = row_json(results[i]);
    j["traj_id"] = aligned[i].gt->traj_id;
    j["step"] = aligned[i].gt->step;
    lines += j.dump() + "\n";
    mean.match_loss += results[i].match_loss;
    mean.bbox_term += results[i].bbox_term;
    mean.label_term += results[i].label_term;
    mean.text_term += results[i].text_term;
    mean.ce_loss += results[i].ce_loss;
    mean.total += results[i].total;
  }
  const double n = static_cast<double>(results.size());
  json agg{{"aggregate", true},
           {"samples", results.size()},
           {"match_loss", mean.match_loss / n},
           {"bbox_term", mean.bbox_term / n},
           {"label_term", mean.label_term / n},
           {"text_term", mean.text_term / n},
           {"ce_loss", mean.ce_loss / n},
           {"total", mean.total / n}};
  lines += agg.dump() + "\n";
  write_text_file(a.output, lines);
  if (g.format == "json") {
    std::cout << lines;
  } else {
    std::vector<std::vector<std::string>> rows{{"sample", "match", "bbox", "label", "text", "ce", "total"}};
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& l = results[i];
      rows.push_back({aligned[i].gt->traj_id + "#" + std::to_string(aligned[i].gt->step), fmt_num(l.match_loss),
                      fmt_num(l.bbox_term), fmt_num(l.label_term), fmt_num(l.text_term), fmt_num(l.ce_loss),
                      fmt_num(l.total)});
    }
    rows.push_back({"mean", fmt_num(mean.match_loss / n), fmt_num(mean.bbox_term / n), fmt_num(mean.label_term / n),
                    fmt_num(mean.text_term / n), fmt_num(mean.ce_loss / n), fmt_num(mean.total / n)});
    std::cout << render_table(rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plan

struct PlanArgs {
  std::string state_file, goal, app;
  PlanFlags plan;
  NoiseFlags noise;
  RemoteFlags remote;
};

SketchState read_state_file(const std::string& path) {
  const auto text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    const auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError(path + ": invalid JSON");
    return state_from_json(j);
  }
  return parse_state(text);
}

int run_plan(PlanArgs a, const GlobalOptions& g) {
  const SketchState state = read_state_file(a.state_file);
  std::optional<sim::AppSpec> app;
  if (!a.app.empty()) app = sim::load_app(a.app);
  a.noise.cfg.seed = g.seed;
  a.plan.rollout.jobs = g.jobs;

  auto wm = make_world_model(a.plan.wm, app ? &*app : nullptr, a.noise.cfg, a.remote);
  if (app) {
    // Screens that render alike keep the state closest to the app's initial one.
    const auto states = sim::reachable_states(*app, sim::reset(*app));
    for (auto it = states.rbegin(); it != states.rend(); ++it) wm.get().ground(*it);
  }
  auto actor = make_actor(a.plan, a.remote);
  auto reasoner = make_reasoner(a.plan, a.remote);

  const auto tree = build_tree(a.goal, state, wm.get(), *actor, a.plan.rollout);
  for (const auto& note : tree.pruned) spdlog::warn("pruned: {}", note);
  if (tree.roots.empty()) throw std::runtime_error("no candidate survived tree construction");
  TreeTextOptions opt;
  opt.full_states = a.plan.full_states;
  const auto text = serialize_tree(tree, opt);
  const auto sel = select_action(*reasoner, a.goal, state, tree, text);
  if (sel.fallback) spdlog::warn("reasoner reply unusable; selected candidate 1");

  if (g.format == "json") {
    std::cout << json{{"tree_text", text},
                      {"nodes", tree.node_count()},
                      {"selected", sel.index},
                      {"action", to_json(sel.action)},
                      {"rationale", sel.rationale},
                      {"fallback", sel.fallback}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << text << "\nselected " << sel.index << ": " << action_str(sel.action) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string suite, mode = "both", output;
  PlanFlags plan;
  NoiseFlags noise;
  RemoteFlags remote;
};

int run_simulate(SimulateArgs a, const GlobalOptions& g) {
  const auto tasks = sim::load_suite(a.suite);
  if (tasks.empty()) throw InputError(a.suite + ": no *.task.json files");
  a.noise.cfg.seed = g.seed;
  a.noise.cfg.validate();
  a.plan.rollout.validate();

  std::vector<AgentMode> modes;
  if (a.mode != "lookahead") modes.push_back(AgentMode::reactive);
  if (a.mode != "reactive") modes.push_back(AgentMode::lookahead);

  std::vector<EpisodeResult> episodes(tasks.size() * modes.size());
  parallel_for(episodes.size(), g.jobs, [&](std::size_t k) {
    const auto mode = modes[k / tasks.size()];
    const auto& t = tasks[k % tasks.size()];
    auto actor = make_actor(a.plan, a.remote);
    auto reasoner = make_reasoner(a.plan, a.remote);
    auto wm = make_world_model(a.plan.wm, t.app.get(), a.noise.cfg, a.remote);
    episodes[k] = run_episode(t.task, *t.app, mode, {*actor, reasoner.get(), &wm.get()}, a.plan.rollout);
  });

  json summary{{"suite", a.suite}, {"world_model", a.plan.wm}, {"depth", a.plan.rollout.depth},
               {"branching", a.plan.rollout.branching}, {"seed", g.seed}, {"modes", json::object()}};
  std::vector<std::vector<std::string>> rows{{"mode", "tasks", "success", "SR"}};
  std::string lines;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& e = episodes[m * tasks.size() + i];
      ok += e.success ? 1 : 0;
      lines += to_json(e).dump() + "\n";
      for (const auto& note : e.notes) spdlog::debug("{} [{}]: {}", e.task_id, to_string(e.mode), note);
    }
    const double sr = static_cast<double>(ok) / static_cast<double>(tasks.size());
    summary["modes"][to_string(modes[m])] = {{"tasks", tasks.size()}, {"successes", ok}, {"sr", sr}};
    rows.push_back({to_string(modes[m]), std::to_string(tasks.size()), std::to_string(ok), fmt_num(100.0 * sr, 2) + "%"});
  }
  write_text_file(a.output, lines);
  if (g.format == "json") {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << lines << render_table(rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dataset

struct DatasetArgs {
  std::string input, output, train = "train.jsonl", test = "test.jsonl";
  double test_fraction = 0.05;
};

int run_dataset_build(const DatasetArgs& a, const GlobalOptions& g) {
  const auto trajectories = read_trajectories(a.input);
  std::vector<std::string> skipped;
  const auto records = build_transitions(trajectories, &skipped);
  for (const auto& id : skipped) spdlog::warn("EmptyTrajectory: '{}' has no steps; skipped", id);
  write_jsonl(a.output, records);
  const json j{{"trajectories", trajectories.size()}, {"skipped", skipped.size()}, {"transitions", records.size()},
               {"output", a.output}};
  if (g.format == "json") {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << render_table({{"trajectories", std::to_string(trajectories.size())},
                               {"skipped", std::to_string(skipped.size())},
                               {"transitions", std::to_string(records.size())}});
  }
  return kExitOk;
}

int run_dataset_split(const DatasetArgs& a, const GlobalOptions& g) {
  const auto records = read_transitions(a.input);
  const auto split = split_by_trajectory(records, a.test_fraction, g.seed);
  write_jsonl(a.train, split.train);
  write_jsonl(a.test, split.test);
  const json j{{"train_records", split.train.size()}, {"test_records", split.test.size()},
               {"test_trajectories", split.test_ids}, {"seed", g.seed}, {"test_fraction", a.test_fraction}};
  if (g.format == "json") {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << render_table({{"train records", std::to_string(split.train.size())},
                               {"test records", std::to_string(split.test.size())},
                               {"test trajectories", std::to_string(split.test_ids.size())}});
  }
  return kExitOk;
}

bool is_input_error(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const SketchError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const json::exception*>(&e))
    return true;
  if (const auto* s = dynamic_cast<const sim::SimError*>(&e))
    return s->code() == sim::SimErrc::schema_error || s->code() == sim::SimErrc::dangling_screen_ref;
  if (const auto* d = dynamic_cast<const DatasetError*>(&e))
    return d->code() != DatasetErrc::io_error || std::string(e.what()).find("cannot open") != std::string::npos;
  if (const auto* r = dynamic_cast<const RemoteError*>(&e)) return r->code() == RemoteErrc::config;
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Textual-sketch world model toolkit: evaluation, loss, lookahead planning, simulation, datasets"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values");

  GlobalOptions g;
  app.add_option("--log-level", g.log_level, "Log verbosity")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.add_option("--seed", g.seed, "Seed for every stochastic component");
  app.add_option("--jobs,-j", g.jobs, "Worker threads for per-sample / per-task fan-out")->check(CLI::PositiveNumber);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Element-level metrics of predictions against ground truth");
  eval_cmd->add_option("pred", eval.pred, "Prediction JSONL (traj_id, step, pred)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("gt", eval.gt, "Ground-truth transitions JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--theta-iou", eval.cfg.theta_iou, "IoU threshold (pairs need IoU above it)")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--theta-txt", eval.cfg.theta_txt, "Normalized edit distance threshold (pairs need it below)")
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_flag("--dedup", eval.cfg.dedup_predictions, "Drop predicted elements repeating an earlier text");
  eval_cmd->add_flag("--macro", eval.cfg.macro, "Average precision/recall per sample instead of summing counts");
  eval_cmd->add_option("--output,-o", eval.output, "JSON report path (empty string: do not write)");
  add_format(eval_cmd, g);

  LossArgs loss;
  auto* loss_cmd = app.add_subcommand("loss", "Order-invariant matching loss per sample and on average");
  loss_cmd->add_option("pred", loss.pred, "Prediction JSONL")->required()->check(CLI::ExistingFile);
  loss_cmd->add_option("gt", loss.gt, "Ground-truth transitions JSONL")->required()->check(CLI::ExistingFile);
  loss_cmd->add_option("--lambda-bbox", loss.w.lambda_bbox, "Weight of the 1 - IoU term");
  loss_cmd->add_option("--lambda-label", loss.w.lambda_label, "Weight of the label NLL term");
  loss_cmd->add_option("--lambda-text", loss.w.lambda_text, "Weight of the 1 - cosine text term");
  loss_cmd->add_option("--lambda-ce", loss.w.lambda_ce, "Weight of the token cross-entropy term");
  loss_cmd->add_option("--unmatched-penalty", loss.unmatched_penalty,
                       "Cost per unmatched element; negative disables it");
  loss_cmd->add_option("--label-smoothing", loss.label_smoothing, "Epsilon used to lift hard labels")
      ->check(CLI::Range(1e-9, 0.999999));
  loss_cmd->add_option("--output,-o", loss.output, "JSONL output path (per sample, then the aggregate)");
  add_format(loss_cmd, g);

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Build one prediction tree and select an action");
  plan_cmd->add_option("--state", plan.state_file, "Current screen (sketch lines or JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  plan_cmd->add_option("--goal", plan.goal, "Task goal")->required();
  plan_cmd->add_option("--app", plan.app, "App definition backing the oracle world model")->check(CLI::ExistingFile);
  plan.plan.add(plan_cmd);
  plan.noise.add(plan_cmd);
  plan.remote.add(plan_cmd);
  add_format(plan_cmd, g);

  SimulateArgs simulate;
  auto* sim_cmd = app.add_subcommand("simulate", "Run every task of a suite and report success rates");
  sim_cmd->add_option("suite", simulate.suite, "Directory of *.task.json files")->required()->check(CLI::ExistingDirectory);
  sim_cmd->add_option("--mode", simulate.mode, "Agent mode")->check(CLI::IsMember({"reactive", "lookahead", "both"}));
  sim_cmd->add_option("--output,-o", simulate.output, "Per-episode JSONL path");
  simulate.plan.add(sim_cmd);
  simulate.noise.add(sim_cmd);
  simulate.remote.add(sim_cmd);
  add_format(sim_cmd, g);

  DatasetArgs ds;
  auto* ds_cmd = app.add_subcommand("dataset", "Transition datasets");
  ds_cmd->require_subcommand(1);
  auto* build_cmd = ds_cmd->add_subcommand("build", "Split trajectories into step-level transitions");
  build_cmd->add_option("--input,-i", ds.input, "Trajectory JSONL")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--output,-o", ds.output, "Transition JSONL")->required();
  add_format(build_cmd, g);
  auto* split_cmd = ds_cmd->add_subcommand("split", "Trajectory-level train/test split");
  split_cmd->add_option("--input,-i", ds.input, "Transition JSONL")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--train", ds.train, "Train output JSONL");
  split_cmd->add_option("--test", ds.test, "Test output JSONL");
  split_cmd->add_option("--test-fraction", ds.test_fraction, "Fraction of trajectories held out")
      ->check(CLI::Range(0.0, 1.0));
  add_format(split_cmd, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  auto logger = spdlog::stderr_color_mt("dreamer");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*eval_cmd) return run_eval(eval, g);
    if (*loss_cmd) return run_loss(loss, g);
    if (*plan_cmd) return run_plan(plan, g);
    if (*sim_cmd) return run_simulate(simulate, g);
    if (*build_cmd) return run_dataset_build(ds, g);
    if (*split_cmd) return run_dataset_split(ds, g);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return is_input_error(e) ? kExitInput : kExitRuntime;
  }
  return kExitRuntime;
}
