#include "blindtrack/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

namespace blindtrack {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool printable_key(const Key& k) { return k.key.size() == 1 || k.key == "<Space>"; }

bool state_has_kind(const UiState& s, ElementKind kind) {
  return std::any_of(s.elements.begin(), s.elements.end(),
                     [&](const UiElement& e) { return e.kind == kind; });
}

bool region_hits_kind(const UiState& s, const Region& r, ElementKind kind) {
  for (const UiElement& e : s.elements) {
    if (e.kind == kind && r.intersects(e.rect)) return true;
  }
  return false;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(TransitionScheme s) {
  return s == TransitionScheme::kEqualTransitions ? "equal" : "area";
}

std::optional<TransitionScheme> transition_scheme_from_string(std::string_view text) {
  if (text == "equal" || text == "equal_transitions") {
    return TransitionScheme::kEqualTransitions;
  }
  if (text == "area" || text == "element_area") return TransitionScheme::kElementArea;
  return std::nullopt;
}

std::string_view to_string(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::kSliderDrag:
      return "slider_drag";
    case EvidenceKind::kTextInput:
      return "text_input";
    case EvidenceKind::kPlainClick:
      return "plain_click";
  }
  return "?";
}

void EstimatorConfig::check() const {
  if (!(detection_scale > 0.0 && detection_scale <= 1.0)) {
    throw std::invalid_argument("detection_scale must lie in (0, 1]");
  }
  if (!(target_prob_threshold > 0.0 && target_prob_threshold <= 1.0)) {
    throw std::invalid_argument("target_prob_threshold must lie in (0, 1]");
  }
  if (!(prune_epsilon >= 0.0)) throw std::invalid_argument("prune_epsilon must be >= 0");
  if (max_trackers == 0) throw std::invalid_argument("max_trackers must be positive");
  if (drag_threshold <= 0) throw std::invalid_argument("drag_threshold must be positive");
}

TrackerOverflow::TrackerOverflow(std::size_t wanted, std::size_t limit)
    : std::runtime_error("tracker count " + std::to_string(wanted) +
                         " would exceed max_trackers " + std::to_string(limit)),
      wanted_(wanted) {}

std::optional<Evidence> classify(std::span<const InputEvent> window, int drag_threshold) {
  bool pressed = false;
  bool saw_press = false;
  int press_x = 0;
  int travel = 0;
  int keys = 0;
  std::optional<Evidence> gesture;
  for (const InputEvent& e : window) {
    std::visit(Overloaded{
                   [&](const MouseMove& m) {
                     if (pressed) travel += m.d.dx;
                   },
                   [&](const ButtonDown&) {
                     if (pressed) return;
                     pressed = saw_press = true;
                     travel = 0;
                   },
                   [&](const ButtonUp&) {
                     if (!pressed) return;
                     pressed = false;
                     gesture = Evidence{std::abs(travel) >= drag_threshold
                                            ? EvidenceKind::kSliderDrag
                                            : EvidenceKind::kPlainClick,
                                        travel, 0};
                   },
                   [&](const Key& k) {
                     if (printable_key(k)) ++keys;
                   },
                   [&](const TouchDown& t) {
                     if (pressed) return;
                     pressed = saw_press = true;
                     press_x = t.at.x;
                     travel = 0;
                   },
                   [&](const TouchMove& t) {
                     if (pressed) travel = t.at.x - press_x;
                   },
                   [&](const TouchUp& t) {
                     if (!pressed) return;
                     pressed = false;
                     travel = t.at.x - press_x;
                     gesture = Evidence{std::abs(travel) >= drag_threshold
                                            ? EvidenceKind::kSliderDrag
                                            : EvidenceKind::kPlainClick,
                                        travel, 0};
                   },
                   [&](const Boot&) {},
               },
               e.payload);
  }
  (void)saw_press;
  if (gesture) return gesture;
  if (keys > 0) return Evidence{EvidenceKind::kTextInput, 0, keys};
  return std::nullopt;
}

Estimator::Estimator(std::shared_ptr<const UiModel> model, EstimatorConfig cfg)
    : model_(std::move(model)), cfg_(cfg) {
  if (!model_) throw std::invalid_argument("estimator needs a model");
  cfg_.check();
}

Estimator Estimator::init_known(std::shared_ptr<const UiModel> model, StateIndex state,
                                std::optional<Point> cursor, EstimatorConfig cfg) {
  Estimator est(std::move(model), cfg);
  if (state >= est.model_->states.size()) {
    throw std::out_of_range("unknown state index " + std::to_string(state));
  }
  const Rect screen = est.model_->screen();
  Region r = Region::from_rect(screen);
  if (cursor) {
    if (!screen.contains(*cursor)) throw std::out_of_range("cursor outside the screen");
    r = Region::from_point(*cursor);
  }
  est.trackers_.push_back({state, std::move(r), 1.0});
  return est;
}

Estimator Estimator::init_unknown(std::shared_ptr<const UiModel> model, EstimatorConfig cfg) {
  Estimator est(std::move(model), cfg);
  const std::size_t n = est.model_->states.size();
  const Region full = Region::from_rect(est.model_->screen());
  for (StateIndex s = 0; s < n; ++s) {
    est.trackers_.push_back({s, full, 1.0 / static_cast<double>(n)});
  }
  return est;
}

void Estimator::on_move(Delta d) {
  if (cfg_.input_mode != InputMode::kRelativeMouse) {
    throw std::logic_error("on_move in absolute_touch mode");
  }
  click_hit_.clear();
  if (d.dx == 0 && d.dy == 0) return;
  const Rect screen = model_->screen();
  for (Tracker& t : trackers_) t.region = t.region.translate_clip(d, screen);
}

void Estimator::on_click(std::optional<Point> at) {
  const bool touch = cfg_.input_mode == InputMode::kAbsoluteTouch;
  if (touch != at.has_value()) {
    throw std::logic_error(touch ? "touch click needs a position"
                                 : "relative click takes no position");
  }
  std::optional<Region> touch_region;
  if (at) touch_region = Region::from_point(*at);

  struct Outcome {
    StateIndex state;
    Region region;
    double weight;
    bool transition;
    double apriori;
    bool hit;
  };
  std::vector<Tracker> next;
  std::vector<char> hits;
  next.reserve(trackers_.size() * 2);
  std::vector<Outcome> outs;
  std::vector<Rect> holes;
  for (const Tracker& parent : trackers_) {
    const Region& region = touch_region ? *touch_region : parent.region;
    const UiState& st = model_->states[parent.state];
    outs.clear();
    holes.clear();
    for (const UiElement& e : st.elements) {
      if (!e.transition_to) continue;
      holes.push_back(e.rect);
      if (!region.intersects(e.rect)) continue;
      Region child = region.intersect(e.rect);
      if (child.empty()) continue;
      outs.push_back(
          {model_->destination(e), std::move(child), 0.0, true, e.a_priori_weight, true});
    }
    Region stay = holes.empty() ? region : region.subtract(holes);
    if (!stay.empty()) {
      bool hit = false;
      for (const UiElement& e : st.elements) {
        if (!e.transition_to && stay.intersects(e.rect)) {
          hit = true;
          break;
        }
      }
      outs.push_back({parent.state, std::move(stay), 0.0, false, 1.0, hit});
    }
    if (outs.empty()) continue;

    if (cfg_.transition_scheme == TransitionScheme::kEqualTransitions) {
      for (Outcome& o : outs) o.weight = 1.0 / static_cast<double>(outs.size());
    } else {
      const double total = static_cast<double>(region.area());
      for (Outcome& o : outs) o.weight = static_cast<double>(o.region.area()) / total;
    }
    if (cfg_.a_priori) {
      double mass = 0.0;
      double weighted = 0.0;
      for (const Outcome& o : outs) {
        if (!o.transition) continue;
        mass += o.weight;
        weighted += o.weight * o.apriori;
      }
      for (Outcome& o : outs) {
        if (!o.transition) continue;
        o.weight = weighted > 0.0 ? mass * o.weight * o.apriori / weighted : 0.0;
      }
    }
    for (Outcome& o : outs) {
      const double p = parent.prob * o.weight;
      if (p <= 0.0) continue;
      next.push_back({o.state, std::move(o.region), p});
      hits.push_back(o.hit ? 1 : 0);
    }
  }
  if (next.size() > cfg_.max_trackers) throw TrackerOverflow(next.size(), cfg_.max_trackers);
  if (next.empty()) throw std::runtime_error("click eliminated every hypothesis");
  trackers_ = std::move(next);
  click_hit_ = std::move(hits);
  ++clicks_;
  normalize_and_prune();
  if (cfg_.merge_same_state) merge_states();
}

bool Estimator::consistent(const Tracker& t, EvidenceKind kind) const {
  const UiState& st = model_->states[t.state];
  switch (kind) {
    case EvidenceKind::kSliderDrag:
      return region_hits_kind(st, t.region, ElementKind::kSlider);
    case EvidenceKind::kTextInput:
      // Keystrokes carry no position; the state only needs a text field.
      return state_has_kind(st, ElementKind::kTextField);
    case EvidenceKind::kPlainClick:
      for (const UiElement& e : st.elements) {
        if (t.region.intersects(e.rect)) return true;
      }
      return false;
  }
  return false;
}

void Estimator::on_evidence(const Evidence& ev) {
  if (ev.kind == EvidenceKind::kPlainClick && click_hit_.size() == trackers_.size()) {
    scale(click_hit_);
    return;
  }
  std::vector<char> flags(trackers_.size());
  for (std::size_t i = 0; i < trackers_.size(); ++i) {
    flags[i] = consistent(trackers_[i], ev.kind) ? 1 : 0;
  }
  scale(flags);
}

void Estimator::scale(const std::vector<char>& consistent_flags) {
  const double s = cfg_.detection_scale;
  for (std::size_t i = 0; i < trackers_.size(); ++i) {
    trackers_[i].prob *= consistent_flags[i] ? s : (1.0 - s);
  }
  normalize_and_prune();
}

void Estimator::normalize_and_prune() {
  auto normalize = [&] {
    double total = 0.0;
    for (const Tracker& t : trackers_) total += t.prob;
    if (total <= 0.0) {
      // Every tracker scaled to zero (detection_scale = 1 with inconsistent
      // evidence everywhere): fall back to uniform weights.
      for (Tracker& t : trackers_) t.prob = 1.0 / static_cast<double>(trackers_.size());
      return;
    }
    for (Tracker& t : trackers_) t.prob /= total;
  };
  normalize();
  if (cfg_.prune_epsilon <= 0.0) return;
  const bool aligned = click_hit_.size() == trackers_.size();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < trackers_.size(); ++i) {
    if (trackers_[i].prob < cfg_.prune_epsilon) continue;
    if (kept != i) {
      trackers_[kept] = std::move(trackers_[i]);
      if (aligned) click_hit_[kept] = click_hit_[i];
    }
    ++kept;
  }
  if (kept == trackers_.size()) return;
  trackers_.resize(kept);
  if (aligned) click_hit_.resize(kept);
  normalize();
}

void Estimator::merge_states() {
  std::map<StateIndex, std::size_t> slot;
  std::vector<Tracker> merged;
  click_hit_.clear();
  for (Tracker& t : trackers_) {
    auto [it, fresh] = slot.try_emplace(t.state, merged.size());
    if (fresh) {
      merged.push_back(std::move(t));
    } else {
      Tracker& m = merged[it->second];
      m.region = m.region.unite(t.region);
      m.prob += t.prob;
    }
  }
  trackers_ = std::move(merged);
}

Estimate Estimator::estimate() const {
  Estimate out;
  out.state_probs.assign(model_->states.size(), 0.0);
  for (const Tracker& t : trackers_) out.state_probs[t.state] += t.prob;
  out.tracker_count = trackers_.size();
  for (StateIndex s = 0; s < out.state_probs.size(); ++s) {
    if (out.state_probs[s] > out.top_prob) {
      out.top_prob = out.state_probs[s];
      out.top_state = s;
    }
  }
  out.combined_region = state_region(out.top_state);
  return out;
}

double Estimator::state_probability(StateIndex s) const {
  double p = 0.0;
  for (const Tracker& t : trackers_) {
    if (t.state == s) p += t.prob;
  }
  return p;
}

Region Estimator::state_region(StateIndex s) const {
  std::vector<Rect> rects;
  std::size_t n = 0;
  const Region* only = nullptr;
  for (const Tracker& t : trackers_) {
    if (t.state != s) continue;
    ++n;
    only = &t.region;
    rects.insert(rects.end(), t.region.rects().begin(), t.region.rects().end());
  }
  if (n == 1) return *only;
  return Region::from_rects(rects);
}

const UiElement* smallest_attack_element(const UiModel& model, StateIndex state) {
  const UiElement* best = nullptr;
  for (const UiElement& e : model.states.at(state).elements) {
    if (!e.is_target && !e.is_confirmation) continue;
    if (!best || e.rect.area() < best->rect.area()) best = &e;
  }
  return best;
}

bool Estimator::attack_ready(StateIndex target_state) const {
  if (state_probability(target_state) < cfg_.target_prob_threshold) return false;
  const UiElement* e = smallest_attack_element(*model_, target_state);
  if (!e) return false;
  const Region r = state_region(target_state);
  return !r.empty() && fits_within(r, e->rect);
}

void Estimator::collapse() {
  if (trackers_.empty()) return;
  auto better = [](const Tracker& a, const Tracker& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    if (a.state != b.state) return a.state < b.state;
    if (a.region.area() != b.region.area()) return a.region.area() < b.region.area();
    return a.region.serialize() < b.region.serialize();
  };
  Tracker best = *std::min_element(trackers_.begin(), trackers_.end(), better);
  best.prob = 1.0;
  trackers_.assign(1, std::move(best));
  click_hit_.clear();
  slider_at_press_.clear();
  if (pressed_) slider_at_press_.assign(1, 0);
}

Observation Estimator::observe(const InputEvent& e) {
  Observation obs;
  ++events_;
  const bool touch = cfg_.input_mode == InputMode::kAbsoluteTouch;
  if ((touch && e.is_relative()) || (!touch && e.is_absolute())) {
    throw std::logic_error("event does not match the estimator input mode");
  }
  auto note_press = [&](std::optional<Point> at) {
    pressed_ = true;
    travel_x_ = 0;
    in_key_burst_ = false;
    slider_at_press_.assign(trackers_.size(), 0);
    for (std::size_t i = 0; i < trackers_.size(); ++i) {
      const UiState& st = model_->states[trackers_[i].state];
      bool hit = false;
      for (const UiElement& el : st.elements) {
        if (el.kind != ElementKind::kSlider) continue;
        if (at ? el.rect.contains(*at) : trackers_[i].region.intersects(el.rect)) {
          hit = true;
          break;
        }
      }
      slider_at_press_[i] = hit ? 1 : 0;
    }
  };
  auto release = [&](std::optional<Point> at) {
    pressed_ = false;
    if (std::abs(travel_x_) >= cfg_.drag_threshold) {
      obs.evidence = Evidence{EvidenceKind::kSliderDrag, travel_x_, 0};
      if (cfg_.element_detection) {
        if (slider_at_press_.size() != trackers_.size()) {
          slider_at_press_.assign(trackers_.size(), 1);
        }
        scale(slider_at_press_);
      }
    } else {
      on_click(at);
      obs.click = true;
      obs.evidence = Evidence{EvidenceKind::kPlainClick, travel_x_, 0};
      if (cfg_.element_detection) on_evidence(*obs.evidence);
    }
    slider_at_press_.clear();
  };
  std::visit(Overloaded{
                 [&](const MouseMove& m) {
                   on_move(m.d);
                   if (pressed_) travel_x_ += m.d.dx;
                   in_key_burst_ = false;
                 },
                 [&](const ButtonDown&) {
                   if (!pressed_) note_press(std::nullopt);
                 },
                 [&](const ButtonUp&) {
                   if (pressed_) release(std::nullopt);
                 },
                 [&](const Key& k) {
                   if (!printable_key(k) || in_key_burst_) return;
                   in_key_burst_ = true;
                   obs.evidence = Evidence{EvidenceKind::kTextInput, 0, 1};
                   if (cfg_.element_detection) on_evidence(*obs.evidence);
                 },
                 [&](const TouchDown& t) {
                   if (pressed_) return;
                   note_press(t.at);
                   press_x_ = t.at.x;
                 },
                 [&](const TouchMove& t) {
                   if (pressed_) travel_x_ = t.at.x - press_x_;
                   in_key_burst_ = false;
                 },
                 [&](const TouchUp& t) {
                   if (!pressed_) return;
                   travel_x_ = t.at.x - press_x_;
                   const Rect screen = model_->screen();
                   const Point p{std::clamp(t.at.x, 0, screen.w - 1),
                                 std::clamp(t.at.y, 0, screen.h - 1)};
                   release(p);
                 },
                 [&](const Boot&) {
                   const auto events = events_;
                   const auto clicks = clicks_;
                   *this = init_known(model_, model_->start_index(),
                                      model_->initial_cursor.value_or(Point{0, 0}), cfg_);
                   events_ = events;
                   clicks_ = clicks;
                   obs.rebooted = true;
                 },
             },
             e.payload);
  return obs;
}

std::string Estimator::snapshot() const {
  std::ostringstream os;
  os << "estimator v1\n";
  os << "config scheme=" << to_string(cfg_.transition_scheme)
     << " detection=" << (cfg_.element_detection ? "on" : "off")
     << " scale=" << fmt_double(cfg_.detection_scale)
     << " apriori=" << (cfg_.a_priori ? "on" : "off")
     << " threshold=" << fmt_double(cfg_.target_prob_threshold)
     << " mode=" << to_string(cfg_.input_mode) << " prune=" << fmt_double(cfg_.prune_epsilon)
     << " max=" << cfg_.max_trackers << " drag=" << cfg_.drag_threshold
     << " merge=" << (cfg_.merge_same_state ? "on" : "off") << '\n';
  os << "events " << events_ << " clicks " << clicks_ << '\n';
  for (const Tracker& t : trackers_) {
    os << "tracker " << model_->states[t.state].id << ' ' << fmt_double(t.prob) << ' '
       << t.region.serialize() << '\n';
  }
  return os.str();
}

}  // namespace blindtrack
