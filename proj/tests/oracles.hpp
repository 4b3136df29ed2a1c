#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. Everything here works pixel by pixel or by exhaustive
// enumeration and deliberately avoids the library's region algebra.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "blindtrack/estimator.hpp"
#include "blindtrack/geometry.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack::oracle {

/// Set of pixels on a w x h screen.
struct Bitmap {
  int w = 0;
  int h = 0;
  std::vector<char> px;

  Bitmap() = default;
  Bitmap(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_ * h_), 0) {}

  bool at(int x, int y) const { return px[static_cast<std::size_t>(y * w + x)] != 0; }
  void set(int x, int y, bool v = true) { px[static_cast<std::size_t>(y * w + x)] = v ? 1 : 0; }

  static Bitmap of(const Region& r, int w, int h) {
    Bitmap b(w, h);
    for (const Rect& rc : r.rects()) {
      for (int y = rc.y; y < rc.bottom(); ++y)
        for (int x = rc.x; x < rc.right(); ++x) b.set(x, y);
    }
    return b;
  }
  static Bitmap of(const Rect& rc, int w, int h) {
    Bitmap b(w, h);
    for (int y = std::max(rc.y, 0); y < std::min(rc.bottom(), h); ++y)
      for (int x = std::max(rc.x, 0); x < std::min(rc.right(), w); ++x) b.set(x, y);
    return b;
  }

  std::int64_t count() const {
    return std::count(px.begin(), px.end(), static_cast<char>(1));
  }
  bool any() const { return count() > 0; }

  Bitmap translate_clip(Delta d) const {
    Bitmap out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (at(x, y)) out.set(std::clamp(x + d.dx, 0, w - 1), std::clamp(y + d.dy, 0, h - 1));
    return out;
  }
  Bitmap both(const Bitmap& o) const {
    Bitmap out(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) out.px[i] = px[i] && o.px[i];
    return out;
  }
  Bitmap either(const Bitmap& o) const {
    Bitmap out(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) out.px[i] = px[i] || o.px[i];
    return out;
  }
  Bitmap minus(const Bitmap& o) const {
    Bitmap out(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) out.px[i] = px[i] && !o.px[i];
    return out;
  }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

inline Rect random_rect(std::mt19937_64& rng, int w, int h, bool allow_empty = true) {
  std::uniform_int_distribution<int> xs(allow_empty ? -2 : 0, w - 1);
  std::uniform_int_distribution<int> ys(allow_empty ? -2 : 0, h - 1);
  const int x = xs(rng);
  const int y = ys(rng);
  std::uniform_int_distribution<int> ws(allow_empty ? 0 : 1, std::max(1, w - std::max(x, 0)));
  std::uniform_int_distribution<int> hs(allow_empty ? 0 : 1, std::max(1, h - std::max(y, 0)));
  Rect r{x, y, ws(rng), hs(rng)};
  if (!allow_empty) {
    r.x = std::max(r.x, 0);
    r.y = std::max(r.y, 0);
    r.w = std::min(r.w, w - r.x);
    r.h = std::min(r.h, h - r.y);
  }
  return r;
}

/// Union of up to `max_rects` random in-screen rectangles.
inline Region random_region(std::mt19937_64& rng, int w, int h, int max_rects = 4) {
  std::uniform_int_distribution<int> n(0, max_rects);
  std::vector<Rect> rects;
  for (int i = n(rng); i > 0; --i) rects.push_back(random_rect(rng, w, h, false));
  return Region::from_rects(rects);
}

// ---------------------------------------------------------------- toy models

/// Random 3 or 4 state model on a small screen. Transition-bearing rects in
/// a state never overlap; other elements may overlap anything.
inline UiModel toy_model(std::mt19937_64& rng, int w = 28, int h = 20) {
  UiModel m;
  m.name = "toy";
  m.screen_width = w;
  m.screen_height = h;
  const int n_states = std::uniform_int_distribution<int>(3, 4)(rng);
  std::uniform_int_distribution<int> pick_state(0, n_states - 1);
  std::uniform_int_distribution<int> pick_kind(0, 5);
  for (int s = 0; s < n_states; ++s) {
    UiState st;
    st.id = "s" + std::to_string(s);
    const int n_el = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int k = 0; k < n_el; ++k) {
      UiElement e;
      e.id = st.id + "_e" + std::to_string(k);
      const int kind = pick_kind(rng);
      for (int attempt = 0; attempt < 20; ++attempt) {
        Rect r = random_rect(rng, w, h, false);
        r.w = std::min(r.w, w / 2);
        r.h = std::min(r.h, h / 2);
        e.rect = r;
        if (kind > 2) break;
        bool clash = false;
        for (const UiElement& o : st.elements)
          if (o.transition_to && o.rect.intersects(r)) clash = true;
        if (!clash) break;
        e.rect = {};
      }
      if (e.rect.empty()) continue;
      if (kind <= 2) {
        e.kind = ElementKind::kButton;
        e.transition_to = "s" + std::to_string(pick_state(rng));
      } else if (kind == 3) {
        e.kind = ElementKind::kButton;
      } else if (kind == 4) {
        e.kind = ElementKind::kSlider;
        e.value_domain = ValueDomain{0, 10, 1};
      } else {
        e.kind = ElementKind::kTextField;
        e.value_domain = ValueDomain{0, 100, 1};
      }
      st.elements.push_back(std::move(e));
    }
    m.states.push_back(std::move(st));
  }
  m.start_state = "s0";
  return m;
}

/// Random relative trace with at most `max_clicks` plain clicks, mixed with
/// slider drags and key bursts.
inline Trace toy_trace(std::mt19937_64& rng, const UiModel& m, int max_clicks = 6) {
  Trace tr;
  std::int64_t t = 0;
  auto push = [&](EventPayload p) { tr.events.push_back({t += 10, std::move(p)}); };
  std::uniform_int_distribution<int> mx(-m.screen_width / 2, m.screen_width / 2);
  std::uniform_int_distribution<int> my(-m.screen_height / 2, m.screen_height / 2);
  std::uniform_int_distribution<int> small(-3, 3);
  std::uniform_int_distribution<int> action(0, 9);
  int clicks = 0;
  while (clicks < max_clicks) {
    const int a = action(rng);
    if (a < 4) {
      push(MouseMove{{mx(rng), my(rng)}});
    } else if (a < 7) {
      push(ButtonDown{});
      if (a == 6) push(MouseMove{{small(rng), small(rng)}});
      push(ButtonUp{});
      ++clicks;
    } else if (a == 7) {
      push(ButtonDown{});
      const int dx = std::uniform_int_distribution<int>(10, 16)(rng) * (small(rng) < 0 ? -1 : 1);
      push(MouseMove{{dx, small(rng)}});
      push(ButtonUp{});
    } else if (a == 8) {
      push(Key{"7"});
      push(Key{"4"});
    } else {
      push(Key{"<BS>"});
    }
  }
  return tr;
}

/// Exhaustive outcome-tree posterior: every branch of every click is kept
/// as a pixel set, and per-state probabilities are read off after each
/// event.
class Enumerator {
 public:
  Enumerator(const UiModel& model, std::optional<Point> cursor, const EstimatorConfig& cfg)
      : m_(model), cfg_(cfg) {
    Bitmap start(model.screen_width, model.screen_height);
    if (cursor) {
      start.set(cursor->x, cursor->y);
    } else {
      std::fill(start.px.begin(), start.px.end(), 1);
    }
    branches_.push_back({model.start_index(), std::move(start), 1.0, false});
  }

  void feed(const InputEvent& e) {
    if (const auto* mv = std::get_if<MouseMove>(&e.payload)) {
      for (Branch& b : branches_) b.pixels = b.pixels.translate_clip(mv->d);
      if (pressed_) travel_ += mv->d.dx;
      burst_ = false;
    } else if (std::holds_alternative<ButtonDown>(e.payload)) {
      if (pressed_) return;
      pressed_ = true;
      travel_ = 0;
      burst_ = false;
      for (Branch& b : branches_) {
        b.slider = false;
        for (const UiElement& el : m_.states[b.state].elements)
          if (el.kind == ElementKind::kSlider && b.pixels.both(rect(el)).any()) b.slider = true;
      }
    } else if (std::holds_alternative<ButtonUp>(e.payload)) {
      if (!pressed_) return;
      pressed_ = false;
      if (std::abs(travel_) >= cfg_.drag_threshold) {
        if (cfg_.element_detection) {
          std::vector<char> ok;
          for (const Branch& b : branches_) ok.push_back(b.slider);
          scale(ok);
        }
      } else {
        click();
      }
    } else if (const auto* k = std::get_if<Key>(&e.payload)) {
      if (k->key.size() != 1 || burst_) return;
      burst_ = true;
      if (!cfg_.element_detection) return;
      std::vector<char> ok;
      for (const Branch& b : branches_) {
        bool text = false;
        for (const UiElement& el : m_.states[b.state].elements)
          if (el.kind == ElementKind::kTextField) text = true;
        ok.push_back(text);
      }
      scale(ok);
    }
  }

  std::vector<double> state_probs() const {
    std::vector<double> p(m_.states.size(), 0.0);
    for (const Branch& b : branches_) p[b.state] += b.prob;
    return p;
  }
  std::size_t branches() const { return branches_.size(); }

 private:
  struct Branch {
    StateIndex state;
    Bitmap pixels;
    double prob;
    bool slider;
  };

  Bitmap rect(const UiElement& e) const { return Bitmap::of(e.rect, m_.screen_width, m_.screen_height); }

  void click() {
    std::vector<Branch> next;
    std::vector<char> hit;
    for (const Branch& b : branches_) {
      struct Child {
        StateIndex state;
        Bitmap pixels;
        bool hit;
      };
      std::vector<Child> kids;
      Bitmap stay = b.pixels;
      const UiState& st = m_.states[b.state];
      for (const UiElement& el : st.elements) {
        if (!el.transition_to) continue;
        stay = stay.minus(rect(el));
        Bitmap on = b.pixels.both(rect(el));
        if (on.any()) kids.push_back({*m_.state_index(*el.transition_to), std::move(on), true});
      }
      if (stay.any()) {
        bool h = false;
        for (const UiElement& el : st.elements)
          if (!el.transition_to && stay.both(rect(el)).any()) h = true;
        kids.push_back({b.state, std::move(stay), h});
      }
      const double total = static_cast<double>(b.pixels.count());
      for (Child& c : kids) {
        const double w = cfg_.transition_scheme == TransitionScheme::kEqualTransitions
                             ? 1.0 / static_cast<double>(kids.size())
                             : static_cast<double>(c.pixels.count()) / total;
        next.push_back({c.state, std::move(c.pixels), b.prob * w, false});
        hit.push_back(c.hit);
      }
    }
    branches_ = std::move(next);
    if (cfg_.element_detection) scale(hit);
  }

  void scale(const std::vector<char>& ok) {
    const double s = cfg_.detection_scale;
    double total = 0.0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      branches_[i].prob *= ok[i] ? s : 1.0 - s;
      total += branches_[i].prob;
    }
    for (Branch& b : branches_) b.prob /= total;
  }

  const UiModel& m_;
  EstimatorConfig cfg_;
  std::vector<Branch> branches_;
  bool pressed_ = false;
  int travel_ = 0;
  bool burst_ = false;
};

/// Largest per-state probability difference between the estimator and the
/// enumeration, over every event of `trace`.
inline double posterior_gap(const std::shared_ptr<const UiModel>& model, const Trace& trace,
                            std::optional<Point> cursor, const EstimatorConfig& cfg) {
  Estimator est = Estimator::init_known(model, model->start_index(), cursor, cfg);
  Enumerator en(*model, cursor, cfg);
  double worst = 0.0;
  for (const InputEvent& e : trace.events) {
    est.observe(e);
    en.feed(e);
    const auto want = en.state_probs();
    for (StateIndex s = 0; s < want.size(); ++s)
      worst = std::max(worst, std::abs(want[s] - est.state_probability(s)));
  }
  return worst;
}

}  // namespace blindtrack::oracle
