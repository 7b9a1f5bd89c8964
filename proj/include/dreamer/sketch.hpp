#pragma once

// Textual sketch data model: elements, screen states, actions, and the
// line format `label=<ident>;text="<escaped>";bbox=[x1,y1,x2,y2]`.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <climits>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dreamer {

using json = nlohmann::json;

enum class SketchErrc {
  malformed_line,
  invalid_bbox,
  unterminated_quote,
  invalid_label,
};

inline const char* to_string(SketchErrc code) {
  switch (code) {
    case SketchErrc::malformed_line: return "MalformedLine";
    case SketchErrc::invalid_bbox: return "InvalidBBox";
    case SketchErrc::unterminated_quote: return "UnterminatedQuote";
    case SketchErrc::invalid_label: return "InvalidLabel";
  }
  return "?";
}

class SketchError : public std::runtime_error {
 public:
  SketchError(SketchErrc code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line) {}

  SketchErrc code() const noexcept { return code_; }
  // 1-based line number, 0 when parsing a single element.
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(SketchErrc code, const std::string& message, std::size_t line) {
    std::string out = to_string(code);
    if (line > 0) out += " at line " + std::to_string(line);
    return out + ": " + message;
  }

  SketchErrc code_;
  std::size_t line_;
};

// Axis-aligned pixel rectangle, origin top-left. Zero-area boxes are legal.
class BBox {
 public:
  constexpr BBox() = default;
  BBox(int x1, int y1, int x2, int y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (x1 < 0 || y1 < 0 || x2 < 0 || y2 < 0)
      throw SketchError(SketchErrc::invalid_bbox, "negative coordinate in " + str());
    if (x1 > x2 || y1 > y2)
      throw SketchError(SketchErrc::invalid_bbox, "inverted corners in " + str());
  }

  int x1() const noexcept { return x1_; }
  int y1() const noexcept { return y1_; }
  int x2() const noexcept { return x2_; }
  int y2() const noexcept { return y2_; }
  int width() const noexcept { return x2_ - x1_; }
  int height() const noexcept { return y2_ - y1_; }
  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(width()) * static_cast<std::int64_t>(height());
  }
  std::pair<int, int> center() const noexcept { return {x1_ + width() / 2, y1_ + height() / 2}; }

  // Closed rectangle test, so clicks on the border hit.
  bool contains(int x, int y) const noexcept { return x >= x1_ && x <= x2_ && y >= y1_ && y <= y2_; }
  bool contains(const BBox& o) const noexcept {
    return o.x1_ >= x1_ && o.y1_ >= y1_ && o.x2_ <= x2_ && o.y2_ <= y2_;
  }

  std::string str() const {
    return "[" + std::to_string(x1_) + "," + std::to_string(y1_) + "," + std::to_string(x2_) + "," +
           std::to_string(y2_) + "]";
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  int x1_ = 0, y1_ = 0, x2_ = 0, y2_ = 0;
};

// Intersection over union. When the union is empty (both boxes degenerate)
// the result is 1 for identical boxes and 0 otherwise.
inline double iou(const BBox& a, const BBox& b) {
  const std::int64_t ix = std::max(0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
  const std::int64_t iy = std::max(0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
  const std::int64_t inter = ix * iy;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return a == b ? 1.0 : 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline bool valid_label(std::string_view label) {
  if (label.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(label.front())) ||
      std::isspace(static_cast<unsigned char>(label.back())))
    return false;
  return std::none_of(label.begin(), label.end(), [](char c) {
    return c == ';' || c == '=' || c == '\n' || c == '\r' || c == '"';
  });
}

class Element {
 public:
  Element() : label_("text") {}
  Element(std::string label, std::string text, BBox bbox)
      : label_(std::move(label)), text_(std::move(text)), bbox_(bbox) {
    if (!valid_label(label_)) throw SketchError(SketchErrc::invalid_label, "bad label '" + label_ + "'");
  }

  const std::string& label() const noexcept { return label_; }
  const std::string& text() const noexcept { return text_; }
  const BBox& bbox() const noexcept { return bbox_; }

  friend bool operator==(const Element&, const Element&) = default;

 private:
  std::string label_;
  std::string text_;
  BBox bbox_;
};

// Element order is a serialization artifact; semantic identity is the multiset.
struct SketchState {
  std::vector<Element> elements;
  int screen_width = 0;  // 0 = unknown
  int screen_height = 0;

  std::size_t size() const noexcept { return elements.size(); }
  bool empty() const noexcept { return elements.empty(); }

  bool within_screen() const noexcept {
    if (screen_width <= 0 || screen_height <= 0) return true;
    return std::all_of(elements.begin(), elements.end(), [&](const Element& e) {
      return e.bbox().x2() <= screen_width && e.bbox().y2() <= screen_height;
    });
  }

  friend bool operator==(const SketchState&, const SketchState&) = default;
};

// Multiset equality, ignoring element order.
inline bool same_elements(const SketchState& a, const SketchState& b) {
  if (a.size() != b.size()) return false;
  auto key = [](const Element& e) {
    return std::make_tuple(e.label(), e.text(), e.bbox().x1(), e.bbox().y1(), e.bbox().x2(), e.bbox().y2());
  };
  std::vector<decltype(key(a.elements[0]))> ka, kb;
  for (const auto& e : a.elements) ka.push_back(key(e));
  for (const auto& e : b.elements) kb.push_back(key(e));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  return ka == kb;
}

// ---------------------------------------------------------------------------
// Line format

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

inline bool consume(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) return false;
  s.remove_prefix(prefix.size());
  return true;
}

inline void skip_spaces(std::string_view& s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
}

}  // namespace detail

inline std::string escape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 2);
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string serialize_element(const Element& e) {
  return "label=" + e.label() + ";text=\"" + escape_text(e.text()) + "\";bbox=" + e.bbox().str();
}

inline Element parse_element(std::string_view line) {
  using detail::consume;
  std::string_view s = detail::trim(line);
  const std::string shown(line);
  if (!consume(s, "label=")) throw SketchError(SketchErrc::malformed_line, "expected 'label=' in: " + shown);

  const auto semi = s.find(';');
  if (semi == std::string_view::npos) throw SketchError(SketchErrc::malformed_line, "missing ';' after label in: " + shown);
  std::string label(s.substr(0, semi));
  if (!valid_label(label)) throw SketchError(SketchErrc::malformed_line, "invalid label '" + label + "'");
  s.remove_prefix(semi + 1);

  if (!consume(s, "text=\"")) throw SketchError(SketchErrc::malformed_line, "expected 'text=\"' in: " + shown);
  std::string text;
  bool closed = false;
  while (!s.empty()) {
    const char c = s.front();
    s.remove_prefix(1);
    if (c == '"') {
      closed = true;
      break;
    }
    if (c != '\\') {
      text.push_back(c);
      continue;
    }
    if (s.empty()) break;
    const char esc = s.front();
    s.remove_prefix(1);
    switch (esc) {
      case '"': text.push_back('"'); break;
      case '\\': text.push_back('\\'); break;
      case 'n': text.push_back('\n'); break;
      case 'r': text.push_back('\r'); break;
      default:
        throw SketchError(SketchErrc::malformed_line, std::string("unknown escape '\\") + esc + "' in: " + shown);
    }
  }
  if (!closed) throw SketchError(SketchErrc::unterminated_quote, "text never closed in: " + shown);

  if (!consume(s, ";bbox=[")) throw SketchError(SketchErrc::malformed_line, "expected ';bbox=[' in: " + shown);
  long long coords[4];
  for (int i = 0; i < 4; ++i) {
    detail::skip_spaces(s);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, coords[i]);
    if (ec != std::errc() || coords[i] > INT32_MAX || coords[i] < INT32_MIN)
      throw SketchError(SketchErrc::malformed_line, "bad bbox coordinate in: " + shown);
    s.remove_prefix(static_cast<std::size_t>(ptr - first));
    detail::skip_spaces(s);
    if (!consume(s, i < 3 ? "," : "]"))
      throw SketchError(SketchErrc::malformed_line, "bad bbox separator in: " + shown);
  }
  if (!s.empty()) throw SketchError(SketchErrc::malformed_line, "trailing characters in: " + shown);

  BBox box(static_cast<int>(coords[0]), static_cast<int>(coords[1]), static_cast<int>(coords[2]),
           static_cast<int>(coords[3]));
  return Element(std::move(label), std::move(text), box);
}

// One element per non-empty line; errors carry 1-based line numbers.
inline SketchState parse_state(std::string_view text) {
  SketchState state;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (detail::trim(line).empty()) continue;
    try {
      state.elements.push_back(parse_element(line));
    } catch (const SketchError& e) {
      throw SketchError(e.code(), e.what(), line_no);
    }
  }
  return state;
}

// Lenient variant for model output: malformed lines are skipped and counted.
struct TolerantParse {
  SketchState state;
  std::size_t malformed = 0;
};

inline TolerantParse parse_state_tolerant(std::string_view text) {
  TolerantParse out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.substr(0, 3) == "```") continue;
    // chat models like to bullet their lines
    if (line.substr(0, 2) == "- " || line.substr(0, 2) == "* ") line = detail::trim(line.substr(2));
    try {
      out.state.elements.push_back(parse_element(line));
    } catch (const SketchError&) {
      ++out.malformed;
    }
  }
  return out;
}

inline std::string serialize_state(const SketchState& s) {
  std::string out;
  for (const auto& e : s.elements) {
    out += serialize_element(e);
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Actions

enum class ActionKind { click, type, scroll, wait, terminate, answer };
enum class ScrollDirection { up, down, left, right };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::click: return "click";
    case ActionKind::type: return "type";
    case ActionKind::scroll: return "scroll";
    case ActionKind::wait: return "wait";
    case ActionKind::terminate: return "terminate";
    case ActionKind::answer: return "answer";
  }
  return "?";
}

inline const char* to_string(ScrollDirection d) {
  switch (d) {
    case ScrollDirection::up: return "up";
    case ScrollDirection::down: return "down";
    case ScrollDirection::left: return "left";
    case ScrollDirection::right: return "right";
  }
  return "?";
}

class ActionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline ActionKind parse_action_kind(std::string_view s) {
  static constexpr std::pair<std::string_view, ActionKind> kKinds[] = {
      {"click", ActionKind::click}, {"type", ActionKind::type},           {"scroll", ActionKind::scroll},
      {"wait", ActionKind::wait},   {"terminate", ActionKind::terminate}, {"answer", ActionKind::answer}};
  for (auto [name, kind] : kKinds)
    if (name == s) return kind;
  throw ActionError("unknown action '" + std::string(s) + "'");
}

inline ScrollDirection parse_scroll_direction(std::string_view s) {
  if (s == "up") return ScrollDirection::up;
  if (s == "down") return ScrollDirection::down;
  if (s == "left") return ScrollDirection::left;
  if (s == "right") return ScrollDirection::right;
  throw ActionError("unknown scroll direction '" + std::string(s) + "'");
}

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Action {
  ActionKind kind = ActionKind::wait;
  std::optional<Point> coordinate;
  std::optional<std::string> text;  // type content, or the answer sentence
  std::optional<ScrollDirection> scroll_direction;
  std::optional<std::string> status;  // terminate: "success" / "infeasible"

  static Action click(int x, int y) { return {ActionKind::click, Point{x, y}, {}, {}, {}}; }
  static Action type(std::string content) { return {ActionKind::type, {}, std::move(content), {}, {}}; }
  static Action scroll(ScrollDirection d, int x, int y) { return {ActionKind::scroll, Point{x, y}, {}, d, {}}; }
  static Action wait() { return {}; }
  static Action terminate(std::string st = "success") { return {ActionKind::terminate, {}, {}, {}, std::move(st)}; }
  static Action answer(std::string a) { return {ActionKind::answer, {}, std::move(a), {}, {}}; }

  void validate() const {
    switch (kind) {
      case ActionKind::click:
        if (!coordinate) throw ActionError("click requires a coordinate");
        break;
      case ActionKind::scroll:
        if (!coordinate) throw ActionError("scroll requires a coordinate");
        if (!scroll_direction) throw ActionError("scroll requires a direction");
        break;
      case ActionKind::type:
        if (!text) throw ActionError("type requires text");
        break;
      case ActionKind::wait:
        if (coordinate || text || scroll_direction || status) throw ActionError("wait takes no parameters");
        break;
      case ActionKind::answer:
        if (!text) throw ActionError("answer requires text");
        break;
      case ActionKind::terminate:
        break;
    }
    if (coordinate && (coordinate->x < 0 || coordinate->y < 0)) throw ActionError("negative coordinate");
  }

  friend bool operator==(const Action&, const Action&) = default;
};

inline json to_json(const Action& a) {
  json j;
  j["action"] = to_string(a.kind);
  if (a.coordinate) j["coordinate"] = {a.coordinate->x, a.coordinate->y};
  if (a.scroll_direction) j["scroll_direction"] = to_string(*a.scroll_direction);
  if (a.text) j["text"] = *a.text;
  if (a.status) j["status"] = *a.status;
  return j;
}

inline Action action_from_json(const json& j) {
  if (!j.is_object() || !j.contains("action") || !j["action"].is_string())
    throw ActionError("action object needs a string 'action' field");
  Action a;
  a.kind = parse_action_kind(j["action"].get<std::string>());
  if (auto it = j.find("coordinate"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      throw ActionError("coordinate must be [x, y]");
    const double x = (*it)[0].get<double>(), y = (*it)[1].get<double>();
    if (!(std::abs(x) < 1e9 && std::abs(y) < 1e9)) throw ActionError("coordinate out of range");
    a.coordinate = Point{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
  }
  if (auto it = j.find("scroll_direction"); it != j.end()) {
    if (!it->is_string()) throw ActionError("scroll_direction must be a string");
    a.scroll_direction = parse_scroll_direction(it->get<std::string>());
  }
  if (auto it = j.find("text"); it != j.end()) {
    if (!it->is_string()) throw ActionError("text must be a string");
    a.text = it->get<std::string>();
  }
  if (auto it = j.find("status"); it != j.end()) {
    if (!it->is_string()) throw ActionError("status must be a string");
    a.status = it->get<std::string>();
  }
  a.validate();
  return a;
}

inline std::string action_str(const Action& a) { return to_json(a).dump(); }

// ---------------------------------------------------------------------------
// JSON forms

inline json to_json(const Element& e) {
  return json{{"label", e.label()},
              {"text", e.text()},
              {"bbox", {e.bbox().x1(), e.bbox().y1(), e.bbox().x2(), e.bbox().y2()}}};
}

inline Element element_from_json(const json& j) {
  if (!j.is_object()) throw SketchError(SketchErrc::malformed_line, "element must be an object");
  const auto label = j.find("label");
  const auto text = j.find("text");
  const auto box = j.find("bbox");
  if (label == j.end() || !label->is_string())
    throw SketchError(SketchErrc::malformed_line, "element.label must be a string");
  if (text != j.end() && !text->is_string())
    throw SketchError(SketchErrc::malformed_line, "element.text must be a string");
  if (box == j.end() || !box->is_array() || box->size() != 4)
    throw SketchError(SketchErrc::malformed_line, "element.bbox must be [x1,y1,x2,y2]");
  int c[4];
  for (int i = 0; i < 4; ++i) {
    if (!(*box)[i].is_number_integer()) throw SketchError(SketchErrc::malformed_line, "bbox entries must be integers");
    c[i] = (*box)[i].get<int>();
  }
  auto lbl = label->get<std::string>();
  if (!valid_label(lbl)) throw SketchError(SketchErrc::invalid_label, "bad label '" + lbl + "'");
  return Element(std::move(lbl), text == j.end() ? std::string{} : text->get<std::string>(),
                 BBox(c[0], c[1], c[2], c[3]));
}

inline json to_json(const SketchState& s) {
  json elems = json::array();
  for (const auto& e : s.elements) elems.push_back(to_json(e));
  json j{{"elements", std::move(elems)}};
  if (s.screen_width > 0 || s.screen_height > 0) j["screen"] = {s.screen_width, s.screen_height};
  return j;
}

// Accepts {"elements": [...], "screen": [w, h]} or a bare element array.
inline SketchState state_from_json(const json& j) {
  SketchState s;
  const json* elems = &j;
  if (j.is_object()) {
    auto it = j.find("elements");
    if (it == j.end()) throw SketchError(SketchErrc::malformed_line, "state object needs 'elements'");
    elems = &*it;
    if (auto sc = j.find("screen"); sc != j.end()) {
      if (!sc->is_array() || sc->size() != 2) throw SketchError(SketchErrc::malformed_line, "screen must be [w, h]");
      s.screen_width = (*sc)[0].get<int>();
      s.screen_height = (*sc)[1].get<int>();
    }
  }
  if (!elems->is_array()) throw SketchError(SketchErrc::malformed_line, "elements must be an array");
  for (const auto& e : *elems) s.elements.push_back(element_from_json(e));
  return s;
}

struct Transition {
  std::string goal;
  SketchState pre_state;
  Action action;
  SketchState post_state;
  friend bool operator==(const Transition&, const Transition&) = default;
};

}  // namespace dreamer
