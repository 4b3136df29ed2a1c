#include "blindtrack/generator.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

namespace blindtrack {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool state_has(const UiState& s, const std::string& element) { return s.find(element) != nullptr; }

bool satisfied(const UiModel& m, StateIndex s, const TaskStep& step) {
  if (step.action == TaskStep::Action::kVisit) return m.states[s].id == step.target;
  return state_has(m.states[s], step.target);
}

/// Shortest click path through non-confirmation transitions.
std::vector<const UiElement*> path_to(const UiModel& m, StateIndex from, const TaskStep& step) {
  const std::size_t n = m.states.size();
  std::vector<long> prev(n, -1);
  std::vector<const UiElement*> via(n, nullptr);
  std::vector<char> seen(n, 0);
  std::deque<StateIndex> q{from};
  seen[from] = 1;
  while (!q.empty()) {
    const StateIndex s = q.front();
    q.pop_front();
    if (satisfied(m, s, step)) {
      std::vector<const UiElement*> path;
      for (StateIndex cur = s; cur != from; cur = static_cast<StateIndex>(prev[cur])) {
        path.push_back(via[cur]);
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const UiElement& e : m.states[s].elements) {
      if (!e.transition_to || e.is_confirmation) continue;
      const StateIndex d = m.destination(e);
      if (seen[d]) continue;
      seen[d] = 1;
      prev[d] = static_cast<long>(s);
      via[d] = &e;
      q.push_back(d);
    }
  }
  throw GenerationError("no path from state '" + m.states[from].id + "' to goal '" +
                        step.target + "'");
}

bool reachable(const UiModel& m, StateIndex from, const TaskStep& step) {
  try {
    path_to(m, from, step);
    return true;
  } catch (const GenerationError&) {
    return false;
  }
}

std::pair<int, int> column_run(const UiElement& slider, long index) {
  int lo = -1;
  int hi = -1;
  for (int x = slider.rect.x; x < slider.rect.right(); ++x) {
    if (slider_index_at(slider, x) != index) continue;
    if (lo < 0) lo = x;
    hi = x;
  }
  if (lo < 0) lo = hi = slider.rect.x;
  return {lo, hi};
}

class Simulator {
 public:
  Simulator(const UiModel& m, const UserProfile& p, std::uint64_t seed)
      : m_(m), p_(p), rng_(seed), ts_(boot_state(m)) {
    // Clicks = min + log-normal excess with the profile's mean and sd.
    const double mean_excess = std::max(1e-3, p.mean_clicks - p.min_clicks);
    const double var = p.sd_clicks * p.sd_clicks;
    const double sigma2 = std::log1p(var / (mean_excess * mean_excess));
    const double mu = std::log(mean_excess) - sigma2 / 2.0;
    std::lognormal_distribution<double> excess(mu, std::sqrt(sigma2));
    target_clicks_ = p.min_clicks + static_cast<int>(std::lround(excess(rng_)));
  }

  Trace run(const Task& task) {
    for (std::size_t i = 0; i < task.steps.size(); ++i) {
      const TaskStep& step = task.steps[i];
      int guard = 0;
      while (true) {
        if (++guard > 10000) throw GenerationError("generator did not converge");
        maybe_detour(task, i);
        if (satisfied(m_, ts_.state, step)) break;
        const auto path = path_to(m_, ts_.state, step);
        click_element(*path.front());
      }
      perform(step);
    }
    return std::move(trace_);
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  void emit(std::int64_t t, EventPayload payload) {
    InputEvent e{t, std::move(payload)};
    ts_ = apply_event(m_, std::move(ts_), e);
    trace_.events.push_back(std::move(e));
  }

  std::int64_t gap() {
    std::lognormal_distribution<double> d(std::log(p_.gap_median_ms), p_.gap_sigma);
    return static_cast<std::int64_t>(std::lround(d(rng_)));
  }

  Point clamp(Point q) const {
    return {std::clamp(q.x, 0, m_.screen_width - 1), std::clamp(q.y, 0, m_.screen_height - 1)};
  }

  Point aim(const Rect& r) {
    const double cx = r.x + (r.w - 1) / 2.0;
    const double cy = r.y + (r.h - 1) / 2.0;
    Point q{static_cast<int>(std::lround(normal(cx, p_.pointing_sd * r.w / 2.0))),
            static_cast<int>(std::lround(normal(cy, p_.pointing_sd * r.h / 2.0)))};
    const int mx = std::min(2, (r.w - 1) / 2);
    const int my = std::min(2, (r.h - 1) / 2);
    q.x = std::clamp(q.x, r.x + mx, r.right() - 1 - mx);
    q.y = std::clamp(q.y, r.y + my, r.bottom() - 1 - my);
    return q;
  }

  /// Moves from the current cursor to `to` over roughly `duration` ms in
  /// straight segments with a little jitter.
  void move_to(Point to, std::int64_t duration) {
    const Point from = ts_.cursor;
    if (from == to) {
      t_ += duration;
      return;
    }
    const double avg = (p_.move_step_min_ms + p_.move_step_max_ms) / 2.0;
    const int n = std::max(1, static_cast<int>(duration / avg));
    Point cur = from;
    for (int k = 1; k <= n; ++k) {
      t_ += static_cast<std::int64_t>(std::lround(uniform(p_.move_step_min_ms, p_.move_step_max_ms)));
      const double u = static_cast<double>(k) / n;
      const double s = 1.0 - (1.0 - u) * (1.0 - u);
      Point q = to;
      if (k < n) {
        q = clamp({static_cast<int>(std::lround(from.x + (to.x - from.x) * s + normal(0, 2.0))),
                   static_cast<int>(std::lround(from.y + (to.y - from.y) * s + normal(0, 2.0)))});
      }
      const Delta d{q.x - cur.x, q.y - cur.y};
      if (d.dx == 0 && d.dy == 0) continue;
      emit(t_, MouseMove{d});
      cur = q;
    }
  }

  void approach(Point to) {
    const std::int64_t g = gap();
    const double dist = std::hypot(to.x - ts_.cursor.x, to.y - ts_.cursor.y);
    const std::int64_t mv = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(150 + 0.9 * dist), 100, std::max<std::int64_t>(100, g - 150));
    t_ += std::max<std::int64_t>(0, g - mv);
    move_to(to, mv);
  }

  void press_release_here() {
    emit(t_, ButtonDown{});
    t_ += static_cast<std::int64_t>(std::lround(uniform(60, 140)));
    emit(t_, ButtonUp{});
    ++clicks_;
  }

  std::optional<Point> background_near(Point q) {
    const UiState& s = m_.states[ts_.state];
    for (int i = 0; i < 50; ++i) {
      const Point c = clamp({static_cast<int>(std::lround(normal(q.x, 45.0))),
                             static_cast<int>(std::lround(normal(q.y, 45.0)))});
      const bool hit = std::any_of(s.elements.begin(), s.elements.end(),
                                   [&](const UiElement& e) { return e.rect.contains(c); });
      if (!hit) return c;
    }
    return std::nullopt;
  }

  void click_element(const UiElement& e) {
    const Point q = aim(e.rect);
    if (chance(p_.error_rate)) {
      if (auto miss = background_near(q)) {
        approach(*miss);
        press_release_here();
      }
    }
    approach(q);
    press_release_here();
  }

  void maybe_detour(const Task& task, std::size_t step) {
    // Detour only while the click budget leaves room for the rest of the task.
    if (clicks_ + remaining_clicks(task, step) >= target_clicks_) return;
    std::vector<const UiElement*> options;
    for (const UiElement& e : m_.states[ts_.state].elements) {
      if (!e.transition_to || e.is_confirmation) continue;
      if (!reachable(m_, m_.destination(e), task.steps[step])) continue;
      options.push_back(&e);
    }
    if (options.empty()) return;
    const auto pick = std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng_);
    click_element(*options[pick]);
  }

  int remaining_clicks(const Task& task, std::size_t from_step) const {
    StateIndex s = ts_.state;
    int total = 0;
    for (std::size_t i = from_step; i < task.steps.size(); ++i) {
      const TaskStep& step = task.steps[i];
      const auto path = path_to(m_, s, step);
      total += static_cast<int>(path.size());
      if (!path.empty()) s = m_.destination(*path.back());
      if (step.action == TaskStep::Action::kClick || step.action == TaskStep::Action::kType) {
        ++total;
      }
      if (step.action == TaskStep::Action::kClick) {
        const UiElement* e = m_.states[s].find(step.target);
        if (e && e->transition_to) s = m_.destination(*e);
      }
    }
    return total;
  }

  void perform(const TaskStep& step) {
    const UiState& st = m_.states[ts_.state];
    switch (step.action) {
      case TaskStep::Action::kVisit:
        return;
      case TaskStep::Action::kClick:
        click_element(*st.find(step.target));
        return;
      case TaskStep::Action::kType: {
        const UiElement& field = *st.find(step.target);
        click_element(field);
        t_ += static_cast<std::int64_t>(std::lround(uniform(300, 700)));
        std::vector<std::string> keys = field.clear_keys;
        if (keys.empty()) keys = {"<C-a>"};
        for (char c : step.value) keys.push_back(c == ' ' ? "<Space>" : std::string(1, c));
        for (const std::string& k : keys) {
          emit(t_, Key{k});
          t_ += std::max<std::int64_t>(
              30, static_cast<std::int64_t>(std::lround(normal(p_.key_interval_ms, 40.0))));
        }
        return;
      }
      case TaskStep::Action::kDrag: {
        const UiElement& slider = *st.find(step.target);
        const ValueDomain& d = *slider.value_domain;
        const double want = std::strtod(step.value.c_str(), nullptr);
        const long want_index = domain_index(d, want);
        const auto it = ts_.values.find(slider.id);
        const double now = it != ts_.values.end() ? numeric_value(it->second).value_or(d.min) : d.min;
        const auto [glo, ghi] = column_run(slider, domain_index(d, now));
        const auto [tlo, thi] = column_run(slider, want_index);
        const Point grab{(glo + ghi) / 2, aim(slider.rect).y};
        approach(grab);
        emit(t_, ButtonDown{});
        const Point release{(tlo + thi) / 2, grab.y};
        const auto dur = static_cast<std::int64_t>(200 + 2.0 * std::abs(release.x - grab.x));
        t_ += 80;
        move_to(release, dur);
        t_ += static_cast<std::int64_t>(std::lround(uniform(60, 140)));
        emit(t_, ButtonUp{});
        return;
      }
    }
  }

  const UiModel& m_;
  const UserProfile& p_;
  std::mt19937_64 rng_;
  TerminalState ts_;
  Trace trace_;
  std::int64_t t_ = 0;
  int clicks_ = 0;
  int target_clicks_ = 0;
};

TaskStep parse_step(const YAML::Node& n, std::size_t index) {
  const std::string where = "task step " + std::to_string(index);
  if (!n.IsMap()) throw std::invalid_argument(where + ": expected a mapping");
  TaskStep step;
  int actions = 0;
  for (const auto& [key, action] : {std::pair{"visit", TaskStep::Action::kVisit},
                                    std::pair{"click", TaskStep::Action::kClick},
                                    std::pair{"type", TaskStep::Action::kType},
                                    std::pair{"drag", TaskStep::Action::kDrag}}) {
    if (!n[key]) continue;
    ++actions;
    step.action = action;
    step.target = n[key].as<std::string>();
  }
  if (actions != 1) throw std::invalid_argument(where + ": exactly one of visit/click/type/drag");
  const bool wants_value =
      step.action == TaskStep::Action::kType || step.action == TaskStep::Action::kDrag;
  if (wants_value != static_cast<bool>(n["value"])) {
    throw std::invalid_argument(where + (wants_value ? ": value required" : ": unexpected value"));
  }
  if (wants_value) step.value = n["value"].as<std::string>();
  return step;
}

}  // namespace

void UserProfile::check() const {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) {
    throw std::invalid_argument("error_rate must lie in [0, 1]");
  }
  if (min_clicks < 0 || mean_clicks < min_clicks || sd_clicks < 0.0) {
    throw std::invalid_argument("click count parameters out of range");
  }
  if (gap_median_ms <= 0.0 || gap_sigma < 0.0) throw std::invalid_argument("bad gap distribution");
  if (move_step_min_ms <= 0 || move_step_max_ms < move_step_min_ms) {
    throw std::invalid_argument("bad move cadence");
  }
  if (pointing_sd < 0.0 || key_interval_ms <= 0.0) throw std::invalid_argument("bad noise");
}

Task load_task(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("task syntax: ") + e.what());
  }
  if (!root.IsMap() || !root["steps"] || !root["steps"].IsSequence()) {
    throw std::invalid_argument("task needs a 'steps' list");
  }
  Task task;
  if (root["name"]) task.name = root["name"].as<std::string>();
  std::size_t i = 0;
  try {
    for (const auto& n : root["steps"]) task.steps.push_back(parse_step(n, i++));
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("task step " + std::to_string(i - 1) + ": " + e.what());
  }
  return task;
}

Task load_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open task file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_task(buf.str());
}

Trace generate(const UiModel& model, const UserProfile& profile, const Task& task,
               std::uint64_t seed) {
  profile.check();
  // Reject unreachable goals up front.
  {
    StateIndex s = model.start_index();
    for (const TaskStep& step : task.steps) {
      const auto path = path_to(model, s, step);
      if (!path.empty()) s = model.destination(*path.back());
      if (step.action != TaskStep::Action::kVisit) {
        const UiElement* e = model.states[s].find(step.target);
        if ((step.action == TaskStep::Action::kType && e->kind != ElementKind::kTextField) ||
            (step.action == TaskStep::Action::kDrag && e->kind != ElementKind::kSlider)) {
          throw GenerationError("step on '" + step.target + "' does not match its kind");
        }
        if (step.action == TaskStep::Action::kClick && e->transition_to) s = model.destination(*e);
      }
    }
  }
  Simulator sim(model, profile, seed);
  Trace trace = sim.run(task);
  trace.meta.model = model.name;
  trace.meta.mode = InputMode::kRelativeMouse;
  trace.meta.seed = seed;
  trace.meta.task = task.name;
  return trace;
}

std::size_t count_clicks(const UiModel& model, const Trace& trace) {
  std::size_t n = 0;
  bool pressed = false;
  int travel = 0;
  int press_x = 0;
  for (const InputEvent& e : trace.events) {
    std::visit(Overloaded{
                   [&](const MouseMove& m) {
                     if (pressed) travel += m.d.dx;
                   },
                   [&](const ButtonDown&) {
                     if (!pressed) pressed = true, travel = 0;
                   },
                   [&](const ButtonUp&) {
                     if (pressed && std::abs(travel) < model.drag_threshold) ++n;
                     pressed = false;
                   },
                   [&](const TouchDown& t) {
                     if (!pressed) pressed = true, travel = 0, press_x = t.at.x;
                   },
                   [&](const TouchMove& t) {
                     if (pressed) travel = t.at.x - press_x;
                   },
                   [&](const TouchUp& t) {
                     if (pressed && std::abs(t.at.x - press_x) < model.drag_threshold) ++n;
                     pressed = false;
                   },
                   [&](const auto&) {},
               },
               e.payload);
  }
  return n;
}

Trace to_touchscreen(const UiModel& model, const Trace& trace,
                     std::optional<TerminalState> boot) {
  if (trace.meta.mode != InputMode::kRelativeMouse) {
    throw std::invalid_argument("to_touchscreen needs a relative-mode trace");
  }
  Trace out;
  out.meta = trace.meta;
  out.meta.mode = InputMode::kAbsoluteTouch;
  TerminalState ts = boot ? std::move(*boot) : boot_state(model);
  for (const InputEvent& e : trace.events) {
    const bool was_pressed = ts.pressed;
    ts = apply_event(model, std::move(ts), e);
    std::visit(Overloaded{
                   [&](const MouseMove&) {
                     if (was_pressed) out.events.push_back({e.t_ms, TouchMove{ts.cursor}});
                   },
                   [&](const ButtonDown&) {
                     if (!was_pressed) out.events.push_back({e.t_ms, TouchDown{ts.cursor}});
                   },
                   [&](const ButtonUp&) {
                     if (was_pressed) out.events.push_back({e.t_ms, TouchUp{ts.cursor}});
                   },
                   [&](const Key&) { out.events.push_back(e); },
                   [&](const Boot&) { out.events.push_back(e); },
                   [&](const auto&) {
                     throw std::invalid_argument("absolute event in a relative trace");
                   },
               },
               e.payload);
  }
  return out;
}

}  // namespace blindtrack
