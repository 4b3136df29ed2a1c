#include "blindtrack/terminal_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace blindtrack {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Point clamp_to_screen(const UiModel& m, Point p) {
  return {std::clamp(p.x, 0, m.screen_width - 1),
          std::clamp(p.y, 0, m.screen_height - 1)};
}

Value initial_value(const UiElement& e) {
  if (e.kind == ElementKind::kSlider) {
    const ValueDomain& d = *e.value_domain;
    if (e.initial_value) {
      char* end = nullptr;
      const double v = std::strtod(e.initial_value->c_str(), &end);
      if (end && *end == '\0') return domain_value(d, domain_index(d, v));
    }
    return d.min;
  }
  return e.initial_value.value_or("");
}

bool accepts_char(const UiElement& field, char c) {
  if (!field.value_domain) return true;
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return true;
  return c == '-' && field.value_domain->min < 0.0;
}

const UiElement* current_element(const UiModel& m, const TerminalState& t,
                                 const std::string& id) {
  return m.states.at(t.state).find(id);
}

void update_drag(const UiModel& m, TerminalState& t) {
  if (!t.dragging) return;
  const UiElement* slider = current_element(m, t, *t.dragging);
  if (!slider) {
    t.dragging.reset();
    return;
  }
  t.values[slider->id] = slider_value_at(*slider, t.cursor.x);
}

void press(const UiModel& m, TerminalState& t, Point origin) {
  if (t.pressed) return;
  t.pressed = true;
  t.press_cursor = origin;
  t.press_travel_x = 0;
  const UiElement* e = element_at(m, t.state, t.cursor);
  if (e && e->kind == ElementKind::kSlider) {
    t.dragging = e->id;
    update_drag(m, t);
  }
}

void click(const UiModel& m, TerminalState& t) {
  const UiElement* e = element_at(m, t.state, t.cursor);
  if (e && e->kind == ElementKind::kTextField) {
    if (t.focused != e->id) t.select_all = false;
    t.focused = e->id;
    return;
  }
  t.focused.reset();
  t.select_all = false;
  if (!e) return;
  if (e->kind == ElementKind::kMultipleChoice) {
    t.values[e->group.value_or(e->id)] = e->id;
  }
  if (e->is_confirmation) {
    for (const UiElement& other : m.states.at(t.state).elements) {
      if (!other.is_target) continue;
      auto it = t.values.find(other.id);
      if (it != t.values.end()) t.committed[other.id] = it->second;
    }
  }
  if (e->transition_to) t.state = m.destination(*e);
}

void release(const UiModel& m, TerminalState& t) {
  if (!t.pressed) return;
  t.pressed = false;
  if (t.dragging) {
    update_drag(m, t);
    t.dragging.reset();
    return;
  }
  if (std::abs(t.press_travel_x) >= m.drag_threshold) return;
  click(m, t);
}

void key(const UiModel& m, TerminalState& t, const std::string& k) {
  if (!t.focused) return;
  const UiElement* field = current_element(m, t, *t.focused);
  if (!field || field->kind != ElementKind::kTextField) return;
  Value& slot = t.values[field->id];
  if (!std::holds_alternative<std::string>(slot)) slot = std::string();
  std::string& text = std::get<std::string>(slot);
  if (k == "<C-a>") {
    t.select_all = true;
    return;
  }
  if (k == "<BS>") {
    if (t.select_all) {
      text.clear();
    } else if (!text.empty()) {
      text.pop_back();
    }
    t.select_all = false;
    return;
  }
  char c = 0;
  if (k.size() == 1) {
    c = k[0];
  } else if (k == "<Space>") {
    c = ' ';
  } else {
    return;
  }
  if (!accepts_char(*field, c)) return;
  if (t.select_all) text.clear();
  t.select_all = false;
  text.push_back(c);
}

}  // namespace

std::string format_value(const Value& v, int decimals) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  const double d = std::get<double>(v);
  char buf[64];
  if (decimals >= 0) {
    std::snprintf(buf, sizeof buf, "%.*f", decimals, d);
  } else {
    std::snprintf(buf, sizeof buf, "%.10g", d);
  }
  return buf;
}

std::optional<double> numeric_value(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  const std::string& s = std::get<std::string>(v);
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (!end || *end != '\0') return std::nullopt;
  return d;
}

bool values_equal(const Value& a, const Value& b) {
  const auto na = numeric_value(a);
  const auto nb = numeric_value(b);
  if (na && nb) return std::fabs(*na - *nb) <= 1e-9 * std::max(1.0, std::fabs(*na));
  return format_value(a) == format_value(b);
}

long domain_index(const ValueDomain& d, double value) {
  const long k = std::lround((value - d.min) / d.step);
  return std::clamp(k, 0L, d.steps());
}

double domain_value(const ValueDomain& d, long index) {
  const double v = d.min + static_cast<double>(index) * d.step;
  // Snap away binary noise so printed values stay on the grid.
  const double scale = std::pow(10.0, d.decimals());
  return std::round(v * scale) / scale;
}

long slider_index_at(const UiElement& slider, int x) {
  const ValueDomain& d = *slider.value_domain;
  const long steps = d.steps();
  const long span = std::max(1, slider.rect.w - 1);
  const long col = std::clamp<long>(x - slider.rect.x, 0L, span);
  // Round half up: index = floor((2*col*steps + span) / (2*span)).
  return (2 * col * steps + span) / (2 * span);
}

double slider_value_at(const UiElement& slider, int x) {
  return domain_value(*slider.value_domain, slider_index_at(slider, x));
}

std::optional<int> slider_column_for(const UiElement& slider, long index) {
  for (int x = slider.rect.x; x < slider.rect.right(); ++x) {
    if (slider_index_at(slider, x) == index) return x;
  }
  return std::nullopt;
}

TerminalState boot_state(const UiModel& model) {
  TerminalState t;
  t.state = model.start_index();
  t.cursor = model.initial_cursor.value_or(Point{0, 0});
  for (const UiState& s : model.states) {
    for (const UiElement& e : s.elements) {
      if (e.kind == ElementKind::kSlider || e.kind == ElementKind::kTextField) {
        t.values.try_emplace(e.id, initial_value(e));
      }
    }
  }
  return t;
}

TerminalState apply_event(const UiModel& model, TerminalState t,
                          const InputEvent& e) {
  std::visit(Overloaded{
                 [&](const MouseMove& mv) {
                   t.cursor = clamp_to_screen(model, {t.cursor.x + mv.d.dx, t.cursor.y + mv.d.dy});
                   if (t.pressed) t.press_travel_x += mv.d.dx;
                   update_drag(model, t);
                 },
                 [&](const ButtonDown&) { press(model, t, t.cursor); },
                 [&](const ButtonUp&) { release(model, t); },
                 [&](const Key& k) {
                   if (k.key.empty()) throw std::invalid_argument("empty key event");
                   key(model, t, k.key);
                 },
                 [&](const TouchDown& td) {
                   t.cursor = clamp_to_screen(model, td.at);
                   press(model, t, td.at);
                 },
                 [&](const TouchMove& tm) {
                   t.cursor = clamp_to_screen(model, tm.at);
                   if (t.pressed) t.press_travel_x = tm.at.x - t.press_cursor.x;
                   update_drag(model, t);
                 },
                 [&](const TouchUp& tu) {
                   t.cursor = clamp_to_screen(model, tu.at);
                   if (t.pressed) t.press_travel_x = tu.at.x - t.press_cursor.x;
                   update_drag(model, t);
                   release(model, t);
                 },
                 [&](const Boot&) {
                   TerminalState fresh = boot_state(model);
                   fresh.committed = std::move(t.committed);
                   fresh.events_applied = t.events_applied;
                   t = std::move(fresh);
                 },
             },
             e.payload);
  ++t.events_applied;
  return t;
}

std::vector<TerminalState> run_trace(const UiModel& model, const Trace& trace,
                                     std::optional<TerminalState> boot) {
  std::vector<TerminalState> out;
  out.reserve(trace.events.size() + 1);
  out.push_back(boot ? std::move(*boot) : boot_state(model));
  for (const InputEvent& e : trace.events) {
    out.push_back(apply_event(model, out.back(), e));
  }
  return out;
}

std::string describe(const UiModel& model, const TerminalState& t) {
  std::ostringstream os;
  os << "state=" << model.states.at(t.state).id << " cursor=" << t.cursor.x << ','
     << t.cursor.y << " pressed=" << t.pressed << " focus=" << t.focused.value_or("-")
     << " select_all=" << t.select_all;
  for (const auto& [k, v] : t.values) os << " v:" << k << '=' << format_value(v);
  for (const auto& [k, v] : t.committed) os << " c:" << k << '=' << format_value(v);
  return os.str();
}

std::uint64_t state_digest(const UiModel& model, const TerminalState& t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : describe(model, t)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Terminal::Terminal(std::shared_ptr<const UiModel> model)
    : model_(std::move(model)), state_(boot_state(*model_)) {}

Terminal::Terminal(std::shared_ptr<const UiModel> model, TerminalState boot)
    : model_(std::move(model)), state_(std::move(boot)) {}

void Terminal::apply(const InputEvent& e) {
  state_ = apply_event(*model_, std::move(state_), e);
  log_.push_back(e);
}

}  // namespace blindtrack
