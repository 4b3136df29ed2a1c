#include "blindtrack/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace blindtrack {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view tok, long index, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    if (tok.find('.') != std::string_view::npos || tok.find('e') != std::string_view::npos) {
      throw TraceError(index, "event " + std::to_string(index) + ": fractional " +
                                  what + " '" + std::string(tok) + "' (integer pixels only)");
    }
    throw TraceError(index, "event " + std::to_string(index) + ": bad " + what +
                                " '" + std::string(tok) + "'");
  }
  return v;
}

bool valid_key(std::string_view k) {
  if (k.size() == 1) return k[0] > ' ' && k[0] < 127;
  return k == "<BS>" || k == "<C-a>" || k == "<Space>" || k == "<Enter>" ||
         k == "<Tab>";
}

}  // namespace

bool InputEvent::is_relative() const {
  return std::holds_alternative<MouseMove>(payload) ||
         std::holds_alternative<ButtonDown>(payload) ||
         std::holds_alternative<ButtonUp>(payload);
}

bool InputEvent::is_absolute() const {
  return std::holds_alternative<TouchDown>(payload) ||
         std::holds_alternative<TouchMove>(payload) ||
         std::holds_alternative<TouchUp>(payload);
}

std::string_view to_string(InputMode mode) {
  return mode == InputMode::kRelativeMouse ? "relative_mouse" : "absolute_touch";
}

std::optional<InputMode> input_mode_from_string(std::string_view text) {
  if (text == "relative_mouse") return InputMode::kRelativeMouse;
  if (text == "absolute_touch") return InputMode::kAbsoluteTouch;
  return std::nullopt;
}

std::string format_event(const InputEvent& e) {
  std::string out = std::to_string(e.t_ms) + " ";
  std::visit(Overloaded{
                 [&](const MouseMove& m) {
                   out += "move " + std::to_string(m.d.dx) + " " + std::to_string(m.d.dy);
                 },
                 [&](const ButtonDown&) { out += "down"; },
                 [&](const ButtonUp&) { out += "up"; },
                 [&](const Key& k) { out += "key " + k.key; },
                 [&](const TouchDown& t) {
                   out += "touch_down " + std::to_string(t.at.x) + " " + std::to_string(t.at.y);
                 },
                 [&](const TouchMove& t) {
                   out += "touch_move " + std::to_string(t.at.x) + " " + std::to_string(t.at.y);
                 },
                 [&](const TouchUp& t) {
                   out += "touch_up " + std::to_string(t.at.x) + " " + std::to_string(t.at.y);
                 },
                 [&](const Boot&) { out += "boot"; },
             },
             e.payload);
  return out;
}

InputEvent parse_event(std::string_view line, long index) {
  const auto tok = split_ws(line);
  const std::string at = "event " + std::to_string(index);
  if (tok.size() < 2) throw TraceError(index, at + ": expected '<t_ms> <kind> [args]'");
  InputEvent e;
  e.t_ms = parse_int<std::int64_t>(tok[0], index, "timestamp");
  const std::string_view kind = tok[1];
  auto want = [&](std::size_t n) {
    if (tok.size() != n + 2) {
      throw TraceError(index, at + ": '" + std::string(kind) + "' takes " +
                                  std::to_string(n) + " argument(s)");
    }
  };
  if (kind == "move") {
    want(2);
    e.payload = MouseMove{{parse_int<int>(tok[2], index, "delta"),
                           parse_int<int>(tok[3], index, "delta")}};
  } else if (kind == "down") {
    want(0);
    e.payload = ButtonDown{};
  } else if (kind == "up") {
    want(0);
    e.payload = ButtonUp{};
  } else if (kind == "key") {
    want(1);
    if (!valid_key(tok[2])) {
      throw TraceError(index, at + ": unknown key '" + std::string(tok[2]) + "'");
    }
    e.payload = Key{std::string(tok[2])};
  } else if (kind == "touch_down" || kind == "touch_move" || kind == "touch_up") {
    want(2);
    const Point p{parse_int<int>(tok[2], index, "coordinate"),
                  parse_int<int>(tok[3], index, "coordinate")};
    if (kind == "touch_down") {
      e.payload = TouchDown{p};
    } else if (kind == "touch_move") {
      e.payload = TouchMove{p};
    } else {
      e.payload = TouchUp{p};
    }
  } else if (kind == "boot") {
    want(0);
    e.payload = Boot{};
  } else {
    throw TraceError(index, at + ": unknown event kind '" + std::string(kind) + "'");
  }
  return e;
}

void check_trace(const Trace& trace) {
  bool seen_rel = false;
  bool seen_abs = false;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const InputEvent& e = trace.events[i];
    const long idx = static_cast<long>(i);
    if (i > 0 && e.t_ms < trace.events[i - 1].t_ms) {
      throw TraceError(idx, "event " + std::to_string(i) + ": timestamp " +
                                std::to_string(e.t_ms) + " precedes previous " +
                                std::to_string(trace.events[i - 1].t_ms));
    }
    seen_rel = seen_rel || e.is_relative();
    seen_abs = seen_abs || e.is_absolute();
    if (seen_rel && seen_abs) {
      throw TraceError(idx, "event " + std::to_string(i) +
                                ": relative mouse and absolute touch events mixed");
    }
    const bool expect_abs = trace.meta.mode == InputMode::kAbsoluteTouch;
    if ((expect_abs && e.is_relative()) || (!expect_abs && e.is_absolute())) {
      throw TraceError(idx, "event " + std::to_string(i) + ": event does not match @mode " +
                                std::string(to_string(trace.meta.mode)));
    }
  }
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  std::vector<std::string_view> event_lines;
  bool mode_given = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0].front() == '@') {
      if (!event_lines.empty()) throw TraceError(-1, "header line after events");
      const std::string_view key = tok[0].substr(1);
      const std::string value = tok.size() > 1 ? std::string(tok[1]) : std::string();
      if (key == "format") {
        if (value != "blindtrack-trace/1") throw TraceError(-1, "unsupported trace format '" + value + "'");
      } else if (key == "model") {
        trace.meta.model = value;
      } else if (key == "mode") {
        auto m = input_mode_from_string(value);
        if (!m) throw TraceError(-1, "unknown input mode '" + value + "'");
        trace.meta.mode = *m;
        mode_given = true;
      } else if (key == "seed") {
        trace.meta.seed = parse_int<std::uint64_t>(value, -1, "seed");
      } else if (key == "task") {
        trace.meta.task = value;
      } else {
        throw TraceError(-1, "unknown header '@" + std::string(key) + "'");
      }
      continue;
    }
    event_lines.push_back(line);
  }
  for (std::size_t i = 0; i < event_lines.size(); ++i) {
    trace.events.push_back(parse_event(event_lines[i], static_cast<long>(i)));
  }
  if (!mode_given) {
    for (const auto& e : trace.events) {
      if (e.is_absolute()) {
        trace.meta.mode = InputMode::kAbsoluteTouch;
        break;
      }
      if (e.is_relative()) break;
    }
  }
  check_trace(trace);
  return trace;
}

std::string serialize_trace(const Trace& trace) {
  std::string out = "@format blindtrack-trace/1\n";
  if (!trace.meta.model.empty()) out += "@model " + trace.meta.model + "\n";
  out += "@mode " + std::string(to_string(trace.meta.mode)) + "\n";
  if (trace.meta.seed) out += "@seed " + std::to_string(*trace.meta.seed) + "\n";
  if (!trace.meta.task.empty()) out += "@task " + trace.meta.task + "\n";
  for (const auto& e : trace.events) {
    out += format_event(e);
    out += '\n';
  }
  return out;
}

Trace load_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

void save_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  out << serialize_trace(trace);
}

std::size_t count_releases(const Trace& trace) {
  std::size_t n = 0;
  for (const auto& e : trace.events) {
    if (std::holds_alternative<ButtonUp>(e.payload) ||
        std::holds_alternative<TouchUp>(e.payload)) {
      ++n;
    }
  }
  return n;
}

}  // namespace blindtrack
