#pragma once

// Deterministic synthetic GUI environment. Apps are declarative screen graphs
// loaded from JSON; tasks carry a goal and a machine-checkable predicate.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dreamer/sketch.hpp"

namespace dreamer::sim {

enum class SimErrc { schema_error, dangling_screen_ref, unknown_screen, episode_finished };

inline const char* to_string(SimErrc c) {
  switch (c) {
    case SimErrc::schema_error: return "SchemaError";
    case SimErrc::dangling_screen_ref: return "DanglingScreenRef";
    case SimErrc::unknown_screen: return "UnknownScreen";
    case SimErrc::episode_finished: return "EpisodeFinished";
  }
  return "?";
}

class SimError : public std::runtime_error {
 public:
  SimError(SimErrc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  SimErrc code() const noexcept { return code_; }

 private:
  SimErrc code_;
};

struct Widget {
  std::string id;
  std::string label;
  std::string text;  // may reference variables as {{name}}
  BBox bbox;
  std::optional<std::string> focus;  // variable receiving typed text once focused
};

// Vertical list rendered through a fixed viewport of whole rows.
struct ScrollList {
  BBox area;
  int item_height = 1;
  std::vector<Widget> items;  // item bboxes are assigned at render time

  std::size_t viewport() const { return static_cast<std::size_t>(area.height() / item_height); }
  int max_offset() const {
    const auto vp = viewport();
    return items.size() > vp ? static_cast<int>(items.size() - vp) : 0;
  }
};

struct Screen {
  std::vector<Widget> widgets;
  std::optional<ScrollList> list;
};

struct ActionMatcher {
  ActionKind kind = ActionKind::click;
  std::optional<std::string> target;              // click: widget id
  std::optional<ScrollDirection> direction;       // scroll
  std::optional<std::string> text;                // type: exact content
};

struct Rule {
  std::string from;
  ActionMatcher on;
  std::optional<std::string> to;  // unset = stay on the current screen
  std::map<std::string, std::string> set;
  int priority = 0;
};

struct AppSpec {
  std::string name;
  int screen_width = 0;
  int screen_height = 0;
  std::string initial_screen;
  std::map<std::string, std::string> initial_vars;
  std::map<std::string, Screen> screens;
  std::vector<Rule> transitions;  // file order; ties in priority resolve by position
};

struct EnvState {
  std::string screen;
  std::map<std::string, std::string> vars;
  std::size_t steps = 0;
  std::size_t max_steps = 0;  // 0 = unbounded
  bool done = false;
  std::optional<std::string> focus;
  std::map<std::string, int> scroll_offsets;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

// ---------------------------------------------------------------------------
// Rendering

inline std::string substitute(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(tmpl, pos, open - pos);
    auto it = vars.find(tmpl.substr(open + 2, close - open - 2));
    if (it != vars.end()) out += it->second;
    pos = close + 2;
  }
  out.append(tmpl, pos, std::string::npos);
  return out;
}

struct RenderedWidget {
  const Widget* widget;
  BBox bbox;
};

inline const Screen& screen_of(const AppSpec& spec, const std::string& id) {
  auto it = spec.screens.find(id);
  if (it == spec.screens.end()) throw SimError(SimErrc::unknown_screen, "'" + id + "' in app '" + spec.name + "'");
  return it->second;
}

inline int scroll_offset(const EnvState& env) {
  auto it = env.scroll_offsets.find(env.screen);
  return it == env.scroll_offsets.end() ? 0 : it->second;
}

// Widgets in render order with their on-screen boxes.
inline std::vector<RenderedWidget> visible_widgets(const EnvState& env, const AppSpec& spec) {
  const Screen& screen = screen_of(spec, env.screen);
  std::vector<RenderedWidget> out;
  for (const auto& w : screen.widgets) out.push_back({&w, w.bbox});
  if (screen.list) {
    const auto& list = *screen.list;
    const auto first = static_cast<std::size_t>(std::clamp(scroll_offset(env), 0, list.max_offset()));
    const auto last = std::min(list.items.size(), first + list.viewport());
    for (std::size_t i = first; i < last; ++i) {
      const int row = static_cast<int>(i - first);
      const int y1 = list.area.y1() + row * list.item_height;
      out.push_back({&list.items[i], BBox(list.area.x1(), y1, list.area.x2(), y1 + list.item_height)});
    }
  }
  return out;
}

inline SketchState render_sketch(const EnvState& env, const AppSpec& spec) {
  SketchState s;
  s.screen_width = spec.screen_width;
  s.screen_height = spec.screen_height;
  for (const auto& rw : visible_widgets(env, spec))
    s.elements.emplace_back(rw.widget->label, substitute(rw.widget->text, env.vars), rw.bbox);
  return s;
}

// ---------------------------------------------------------------------------
// Stepping

struct StepResult {
  EnvState env;
  SketchState sketch;
  bool matched = false;  // false when no rule or built-in behavior applied
};

namespace detail {

inline bool rule_matches(const Rule& r, const Action& a, const std::vector<RenderedWidget>& hits) {
  if (r.on.kind != a.kind) return false;
  switch (a.kind) {
    case ActionKind::click:
      return std::any_of(hits.begin(), hits.end(), [&](const RenderedWidget& h) { return h.widget->id == r.on.target; });
    case ActionKind::scroll:
      return !r.on.direction || r.on.direction == a.scroll_direction;
    case ActionKind::type:
      return !r.on.text || r.on.text == a.text;
    default:
      return true;
  }
}

}  // namespace detail

inline StepResult step(const EnvState& env, const AppSpec& spec, const Action& action) {
  if (env.done) throw SimError(SimErrc::episode_finished, "step after the episode ended");
  action.validate();
  const Screen& screen = screen_of(spec, env.screen);
  StepResult r{env, {}, false};
  EnvState& next = r.env;

  std::vector<RenderedWidget> hits;
  if (action.coordinate) {
    for (const auto& rw : visible_widgets(env, spec))
      if (rw.bbox.contains(action.coordinate->x, action.coordinate->y)) hits.push_back(rw);
  }

  switch (action.kind) {
    case ActionKind::click: {
      next.focus.reset();
      for (const auto& h : hits) {
        if (h.widget->focus) {
          next.focus = h.widget->focus;
          r.matched = true;
          break;
        }
      }
      break;
    }
    case ActionKind::type:
      if (env.focus) {
        next.vars[*env.focus] = *action.text;
        r.matched = true;
      }
      break;
    case ActionKind::scroll:
      if (screen.list && screen.list->area.contains(action.coordinate->x, action.coordinate->y)) {
        const int page = static_cast<int>(screen.list->viewport());
        int offset = scroll_offset(env);
        if (action.scroll_direction == ScrollDirection::down) offset = std::min(offset + page, screen.list->max_offset());
        if (action.scroll_direction == ScrollDirection::up) offset = std::max(offset - page, 0);
        next.scroll_offsets[env.screen] = offset;
        r.matched = true;
      }
      break;
    case ActionKind::wait:
      r.matched = true;
      break;
    case ActionKind::terminate:
      next.done = true;
      r.matched = true;
      break;
    case ActionKind::answer:
      next.vars["answer"] = *action.text;
      r.matched = true;
      break;
  }

  const Rule* best = nullptr;
  for (const auto& rule : spec.transitions) {
    if (rule.from != env.screen || !detail::rule_matches(rule, action, hits)) continue;
    if (best == nullptr || rule.priority > best->priority) best = &rule;
  }
  if (best != nullptr) {
    r.matched = true;
    for (const auto& [k, v] : best->set) next.vars[k] = substitute(v, env.vars);
    if (best->to && *best->to != env.screen) {
      next.screen = *best->to;
      next.focus.reset();
    }
  }

  ++next.steps;
  if (next.max_steps > 0 && next.steps >= next.max_steps) next.done = true;
  r.sketch = render_sketch(next, spec);
  return r;
}

// A click at the centre of every visible widget, wait, paging the list both
// ways, and typing `sample_text` when a field has focus.
inline std::vector<Action> probe_actions(const EnvState& env, const AppSpec& spec,
                                         const std::string& sample_text = "Milk") {
  std::vector<Action> out;
  for (const auto& rw : visible_widgets(env, spec)) {
    const auto [x, y] = rw.bbox.center();
    out.push_back(Action::click(x, y));
  }
  out.push_back(Action::wait());
  const Screen& screen = screen_of(spec, env.screen);
  if (screen.list) {
    const auto [x, y] = screen.list->area.center();
    out.push_back(Action::scroll(ScrollDirection::down, x, y));
    out.push_back(Action::scroll(ScrollDirection::up, x, y));
  }
  if (env.focus) out.push_back(Action::type(sample_text));
  return out;
}

// Breadth-first closure of `start` under probe_actions, with step counters
// cleared. Stops after `limit` states.
inline std::vector<EnvState> reachable_states(const AppSpec& spec, EnvState start, std::size_t limit = 1000) {
  start.steps = 0;
  start.max_steps = 0;
  start.done = false;
  std::vector<EnvState> out{start};
  for (std::size_t i = 0; i < out.size() && out.size() < limit; ++i) {
    const EnvState cur = out[i];
    for (const auto& a : probe_actions(cur, spec)) {
      EnvState next = step(cur, spec, a).env;
      next.steps = 0;
      if (std::find(out.begin(), out.end(), next) == out.end()) {
        out.push_back(std::move(next));
        if (out.size() >= limit) break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tasks

struct Predicate {
  enum class Kind { screen_is, var_equals, text_present, all, any, negate };
  Kind kind = Kind::all;
  std::string name;   // screen id, variable name, or text
  std::string value;  // var_equals
  std::vector<Predicate> children;
};

struct TaskSpec {
  std::string id;
  std::string goal;
  std::string app;  // path to the app definition, relative to the task file
  std::optional<std::string> initial_screen;
  std::map<std::string, std::string> initial_vars;
  Predicate success;
  std::size_t max_steps = 10;
};

inline bool evaluate(const Predicate& p, const EnvState& env, const AppSpec& spec) {
  using K = Predicate::Kind;
  switch (p.kind) {
    case K::screen_is: return env.screen == p.name;
    case K::var_equals: {
      auto it = env.vars.find(p.name);
      return it != env.vars.end() && it->second == p.value;
    }
    case K::text_present: {
      const auto s = render_sketch(env, spec);
      return std::any_of(s.elements.begin(), s.elements.end(), [&](const Element& e) { return e.text() == p.name; });
    }
    case K::all:
      return std::all_of(p.children.begin(), p.children.end(), [&](const Predicate& c) { return evaluate(c, env, spec); });
    case K::any:
      return std::any_of(p.children.begin(), p.children.end(), [&](const Predicate& c) { return evaluate(c, env, spec); });
    case K::negate:
      return !p.children.empty() && !evaluate(p.children.front(), env, spec);
  }
  return false;
}

inline bool check_success(const EnvState& env, const AppSpec& spec, const TaskSpec& task) {
  return evaluate(task.success, env, spec);
}

inline EnvState reset(const AppSpec& spec, const TaskSpec& task) {
  EnvState env;
  env.screen = task.initial_screen.value_or(spec.initial_screen);
  screen_of(spec, env.screen);
  env.vars = spec.initial_vars;
  for (const auto& [k, v] : task.initial_vars) env.vars[k] = v;
  env.max_steps = task.max_steps;
  return env;
}

inline EnvState reset(const AppSpec& spec) {
  EnvState env;
  env.screen = spec.initial_screen;
  env.vars = spec.initial_vars;
  return env;
}

// ---------------------------------------------------------------------------
// JSON loading

namespace detail {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw SimError(SimErrc::schema_error, source_ + ": " + path + ": " + what);
  }

  const json& field(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing");
    return *it;
  }

  std::string str(const json& obj, const std::string& path, const char* key) const {
    const auto& v = field(obj, path, key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  std::optional<std::string> opt_str(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) return std::nullopt;
    return str(obj, path, key);
  }

  int integer(const json& obj, const std::string& path, const char* key) const {
    const auto& v = field(obj, path, key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
  }

  BBox box(const json& obj, const std::string& path, const char* key) const {
    const auto& v = field(obj, path, key);
    if (!v.is_array() || v.size() != 4 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number_integer(); }))
      fail(path + "." + key, "expected [x1,y1,x2,y2]");
    try {
      return BBox(v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>());
    } catch (const SketchError& e) {
      fail(path + "." + key, e.what());
    }
  }

  std::map<std::string, std::string> string_map(const json& obj, const std::string& path, const char* key) const {
    std::map<std::string, std::string> out;
    if (!obj.contains(key)) return out;
    const auto& v = obj.at(key);
    if (!v.is_object()) fail(path + "." + key, "expected an object of strings");
    for (const auto& [k, val] : v.items()) {
      if (!val.is_string()) fail(path + "." + key + "." + k, "expected a string");
      out[k] = val.get<std::string>();
    }
    return out;
  }

  Widget widget(const json& j, const std::string& path, bool needs_bbox) const {
    Widget w;
    w.id = str(j, path, "id");
    w.label = str(j, path, "label");
    if (!valid_label(w.label)) fail(path + ".label", "invalid label '" + w.label + "'");
    w.text = j.contains("text") ? str(j, path, "text") : std::string{};
    if (needs_bbox) w.bbox = box(j, path, "bbox");
    w.focus = opt_str(j, path, "focus");
    return w;
  }

 private:
  std::string source_;
};

inline bool overlaps(const BBox& a, const BBox& b) {
  return std::max(a.x1(), b.x1()) < std::min(a.x2(), b.x2()) && std::max(a.y1(), b.y1()) < std::min(a.y2(), b.y2());
}

}  // namespace detail

inline AppSpec app_from_json(const json& j, const std::string& source = "<app>") {
  detail::Reader rd(source);
  AppSpec spec;
  spec.name = rd.str(j, "$", "name");
  spec.initial_screen = rd.str(j, "$", "initial_screen");
  spec.initial_vars = rd.string_map(j, "$", "vars");
  if (j.contains("screen")) {
    const auto& dims = j.at("screen");
    if (!dims.is_array() || dims.size() != 2 || !dims[0].is_number_integer() || !dims[1].is_number_integer())
      rd.fail("$.screen", "expected [width, height]");
    spec.screen_width = dims[0].get<int>();
    spec.screen_height = dims[1].get<int>();
  }

  const auto& screens = rd.field(j, "$", "screens");
  if (!screens.is_object() || screens.empty()) rd.fail("$.screens", "expected a non-empty object");
  for (const auto& [sid, sj] : screens.items()) {
    const std::string path = "$.screens." + sid;
    Screen screen;
    std::vector<std::string> ids;
    if (sj.contains("elements")) {
      const auto& elems = sj.at("elements");
      if (!elems.is_array()) rd.fail(path + ".elements", "expected an array");
      for (std::size_t i = 0; i < elems.size(); ++i) {
        screen.widgets.push_back(rd.widget(elems[i], path + ".elements[" + std::to_string(i) + "]", true));
        ids.push_back(screen.widgets.back().id);
      }
    }
    if (sj.contains("list")) {
      const auto& lj = sj.at("list");
      ScrollList list;
      list.area = rd.box(lj, path + ".list", "area");
      list.item_height = rd.integer(lj, path + ".list", "item_height");
      if (list.item_height <= 0 || list.item_height > list.area.height())
        rd.fail(path + ".list.item_height", "must be positive and fit the list area");
      const auto& items = rd.field(lj, path + ".list", "items");
      if (!items.is_array()) rd.fail(path + ".list.items", "expected an array");
      for (std::size_t i = 0; i < items.size(); ++i) {
        list.items.push_back(rd.widget(items[i], path + ".list.items[" + std::to_string(i) + "]", false));
        ids.push_back(list.items.back().id);
      }
      screen.list = std::move(list);
    }
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end())
      rd.fail(path, "duplicate element id '" + *dup + "'");
    if (spec.screen_width > 0 && spec.screen_height > 0) {
      const BBox bounds(0, 0, spec.screen_width, spec.screen_height);
      for (const auto& w : screen.widgets)
        if (!bounds.contains(w.bbox)) rd.fail(path + "." + w.id, "bbox outside the screen");
      if (screen.list && !bounds.contains(screen.list->area)) rd.fail(path + ".list.area", "outside the screen");
    }
    spec.screens.emplace(sid, std::move(screen));
  }
  if (!spec.screens.count(spec.initial_screen))
    throw SimError(SimErrc::dangling_screen_ref, source + ": initial_screen '" + spec.initial_screen + "'");

  if (j.contains("transitions")) {
    const auto& ts = j.at("transitions");
    if (!ts.is_array()) rd.fail("$.transitions", "expected an array");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string path = "$.transitions[" + std::to_string(i) + "]";
      Rule r;
      r.from = rd.str(ts[i], path, "from");
      r.to = rd.opt_str(ts[i], path, "to");
      r.set = rd.string_map(ts[i], path, "set");
      if (ts[i].contains("priority")) r.priority = rd.integer(ts[i], path, "priority");
      const auto& on = rd.field(ts[i], path, "on");
      try {
        r.on.kind = parse_action_kind(rd.str(on, path + ".on", "action"));
        if (auto d = rd.opt_str(on, path + ".on", "direction")) r.on.direction = parse_scroll_direction(*d);
      } catch (const ActionError& e) {
        rd.fail(path + ".on", e.what());
      }
      r.on.target = rd.opt_str(on, path + ".on", "target");
      r.on.text = rd.opt_str(on, path + ".on", "text");
      for (const auto* ref : {&r.from, r.to ? &*r.to : nullptr}) {
        if (ref != nullptr && !spec.screens.count(*ref))
          throw SimError(SimErrc::dangling_screen_ref, source + ": " + path + " references screen '" + *ref + "'");
      }
      if (r.on.kind == ActionKind::click) {
        if (!r.on.target) rd.fail(path + ".on.target", "click rules need a target element id");
        const Screen& from = spec.screens.at(r.from);
        bool found = std::any_of(from.widgets.begin(), from.widgets.end(), [&](const Widget& w) { return w.id == *r.on.target; });
        if (from.list)
          found = found || std::any_of(from.list->items.begin(), from.list->items.end(), [&](const Widget& w) { return w.id == *r.on.target; });
        if (!found) rd.fail(path + ".on.target", "no element '" + *r.on.target + "' on screen '" + r.from + "'");
      }
      spec.transitions.push_back(std::move(r));
    }
  }

  // Rules that could fire on the same action need distinct priorities.
  for (std::size_t a = 0; a < spec.transitions.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.transitions.size(); ++b) {
      const Rule& ra = spec.transitions[a];
      const Rule& rb = spec.transitions[b];
      if (ra.from != rb.from || ra.on.kind != rb.on.kind || ra.priority != rb.priority) continue;
      bool clash = false;
      if (ra.on.kind == ActionKind::click) {
        if (ra.on.target == rb.on.target) {
          clash = true;
        } else {
          const auto& widgets = spec.screens.at(ra.from).widgets;
          auto find = [&](const std::string& id) -> const Widget* {
            for (const auto& w : widgets)
              if (w.id == id) return &w;
            return nullptr;
          };
          const Widget* wa = find(*ra.on.target);
          const Widget* wb = find(*rb.on.target);
          clash = wa && wb && detail::overlaps(wa->bbox, wb->bbox);
        }
      } else if (ra.on.kind == ActionKind::scroll) {
        clash = !ra.on.direction || !rb.on.direction || ra.on.direction == rb.on.direction;
      } else if (ra.on.kind == ActionKind::type) {
        clash = !ra.on.text || !rb.on.text || ra.on.text == rb.on.text;
      } else {
        clash = true;
      }
      if (clash)
        rd.fail("$.transitions[" + std::to_string(b) + "]",
                "overlaps transitions[" + std::to_string(a) + "] with equal priority");
    }
  }
  return spec;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError(SimErrc::schema_error, path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SimError(SimErrc::schema_error, path.string() + ": " + e.what());
  }
}

inline AppSpec load_app(const std::filesystem::path& path) { return app_from_json(read_json_file(path), path.string()); }

namespace detail {

inline Predicate predicate_from_json(const json& j, const Reader& rd, const std::string& path) {
  using K = Predicate::Kind;
  Predicate p;
  const std::string type = rd.str(j, path, "type");
  if (type == "screen_is") {
    p.kind = K::screen_is;
    p.name = rd.str(j, path, "screen");
  } else if (type == "var_equals") {
    p.kind = K::var_equals;
    p.name = rd.str(j, path, "var");
    p.value = rd.str(j, path, "value");
  } else if (type == "text_present") {
    p.kind = K::text_present;
    p.name = rd.str(j, path, "text");
  } else if (type == "all" || type == "any" || type == "not") {
    p.kind = type == "all" ? K::all : type == "any" ? K::any : K::negate;
    const auto& of = rd.field(j, path, "of");
    if (!of.is_array() || of.empty()) rd.fail(path + ".of", "expected a non-empty array");
    if (p.kind == K::negate && of.size() != 1) rd.fail(path + ".of", "'not' takes exactly one predicate");
    for (std::size_t i = 0; i < of.size(); ++i)
      p.children.push_back(predicate_from_json(of[i], rd, path + ".of[" + std::to_string(i) + "]"));
  } else {
    rd.fail(path + ".type", "unknown predicate '" + type + "'");
  }
  return p;
}

}  // namespace detail

inline TaskSpec task_from_json(const json& j, const std::string& source = "<task>") {
  detail::Reader rd(source);
  TaskSpec t;
  t.id = rd.str(j, "$", "id");
  t.goal = rd.str(j, "$", "goal");
  t.app = rd.str(j, "$", "app");
  t.initial_screen = rd.opt_str(j, "$", "initial_screen");
  t.initial_vars = rd.string_map(j, "$", "vars");
  t.success = detail::predicate_from_json(rd.field(j, "$", "success"), rd, "$.success");
  if (j.contains("max_steps")) {
    const int steps = rd.integer(j, "$", "max_steps");
    if (steps < 1) rd.fail("$.max_steps", "must be >= 1");
    t.max_steps = static_cast<std::size_t>(steps);
  }
  return t;
}

struct LoadedTask {
  TaskSpec task;
  std::shared_ptr<const AppSpec> app;
};

// A suite is a directory of `*.task.json` files, run in filename order.
// Each task names its app file relative to the task file.
inline std::vector<LoadedTask> load_suite(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw SimError(SimErrc::schema_error, dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 10 && name.ends_with(".task.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<fs::path, std::shared_ptr<const AppSpec>> apps;
  std::vector<LoadedTask> out;
  for (const auto& f : files) {
    LoadedTask lt{task_from_json(read_json_file(f), f.string()), nullptr};
    const auto app_path = fs::weakly_canonical(f.parent_path() / lt.task.app);
    auto& slot = apps[app_path];
    if (!slot) slot = std::make_shared<const AppSpec>(load_app(app_path));
    lt.app = slot;
    if (lt.task.initial_screen && !lt.app->screens.count(*lt.task.initial_screen))
      throw SimError(SimErrc::dangling_screen_ref, f.string() + ": initial_screen '" + *lt.task.initial_screen + "'");
    out.push_back(std::move(lt));
  }
  return out;
}

}  // namespace dreamer::sim
