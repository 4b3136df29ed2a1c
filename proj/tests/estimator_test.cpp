#include <random>

#include <gtest/gtest.h>

#include "blindtrack/estimator.hpp"
#include "blindtrack/terminal_sim.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace blindtrack {
namespace {

std::shared_ptr<const UiModel> toy_ab(int bw = 10, int bh = 10, int bx = 20, int by = 20) {
  // State a: one button to b. Screen 100 x 50.
  auto m = std::make_shared<UiModel>(load_model(
      "model_version: 1\nscreen_width: 100\nscreen_height: 50\nstart_state: a\n"
      "states:\n  - id: a\n    elements:\n"
      "      - {id: go, kind: button, rect: [" + std::to_string(bx) + ", " + std::to_string(by) + ", " + std::to_string(bw) + ", " + std::to_string(bh) +
      "], transition_to: b}\n"
      "  - id: b\n    elements:\n"
      "      - {id: field, kind: text_field, rect: [0, 0, 30, 10], value_domain: {min: 0, max: 9, step: 1}}\n"
      "      - {id: back, kind: button, rect: [50, 20, 10, 10], transition_to: a}\n"
      "  - id: c\n    elements: []\n"));
  return m;
}

EstimatorConfig plain(TransitionScheme s) {
  EstimatorConfig c;
  c.transition_scheme = s;
  c.element_detection = false;
  return c;
}

TEST(Estimator, InitKnown) {
  const auto m = test::pacemaker();
  auto est = Estimator::init_known(m, m->start_index(), std::nullopt, {});
  ASSERT_EQ(est.trackers().size(), 1u);
  EXPECT_EQ(est.trackers()[0].prob, 1.0);
  EXPECT_EQ(est.trackers()[0].region.area(), 640 * 480);
  est = Estimator::init_known(m, m->start_index(), Point{0, 0}, {});
  EXPECT_EQ(est.trackers()[0].region.area(), 1);
  EXPECT_THROW(Estimator::init_known(m, 99, std::nullopt, {}), std::out_of_range);
}

TEST(Estimator, InitUnknown) {
  const auto m = test::pacemaker();
  const auto est = Estimator::init_unknown(m, {});
  ASSERT_EQ(est.trackers().size(), m->states.size());
  for (const Tracker& t : est.trackers()) {
    EXPECT_DOUBLE_EQ(t.prob, 1.0 / static_cast<double>(m->states.size()));
    EXPECT_EQ(t.region.area(), 640 * 480);
  }
  const auto toy = Estimator::init_unknown(toy_ab(), {});
  const Estimate e = toy.estimate();
  for (double p : e.state_probs) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  EXPECT_EQ(e.combined_region.area(), 100 * 50);
}

TEST(Estimator, MoveCollapsesToCorner) {
  const auto m = test::pacemaker();
  auto est = Estimator::init_unknown(m, {});
  est.on_move({640, 480});
  for (const Tracker& t : est.trackers()) EXPECT_EQ(t.region, Region::from_point({639, 479}));
  est.on_move({0, 0});
  EXPECT_EQ(est.trackers()[0].region.area(), 1);
  EstimatorConfig touch;
  touch.input_mode = InputMode::kAbsoluteTouch;
  auto t = Estimator::init_unknown(m, touch);
  EXPECT_THROW(t.on_move({1, 1}), std::logic_error);
}

TEST(Estimator, ClickAreaScheme) {
  const auto m = toy_ab();
  auto est = Estimator::init_known(m, 0, std::nullopt, plain(TransitionScheme::kElementArea));
  est.on_click();
  ASSERT_EQ(est.trackers().size(), 2u);
  const double S = 5000.0, b = 100.0;
  EXPECT_EQ(est.trackers()[0].state, m->require_state("b"));
  EXPECT_EQ(est.trackers()[0].region, Region::from_rect({20, 20, 10, 10}));
  EXPECT_NEAR(est.trackers()[0].prob, b / S, 1e-15);
  EXPECT_EQ(est.trackers()[1].state, 0u);
  EXPECT_EQ(est.trackers()[1].region.area(), 4900);
  EXPECT_NEAR(est.trackers()[1].prob, (S - b) / S, 1e-15);
  EXPECT_EQ(est.estimate().top_state, 0u);  // S - b > b

  // A button covering more than half the screen flips the top state.
  const auto big = toy_ab(90, 40, 5, 5);
  auto e2 = Estimator::init_known(big, 0, std::nullopt, plain(TransitionScheme::kElementArea));
  e2.on_click();
  EXPECT_EQ(e2.estimate().top_state, big->require_state("b"));
}

TEST(Estimator, ClickEqualScheme) {
  auto est = Estimator::init_known(toy_ab(), 0, std::nullopt, plain(TransitionScheme::kEqualTransitions));
  est.on_click();
  ASSERT_EQ(est.trackers().size(), 2u);
  EXPECT_DOUBLE_EQ(est.trackers()[0].prob, 0.5);
  EXPECT_DOUBLE_EQ(est.trackers()[1].prob, 0.5);
}

TEST(Estimator, ClickInsideButtonIsCertain) {
  auto est = Estimator::init_known(toy_ab(), 0, Point{25, 25}, plain(TransitionScheme::kEqualTransitions));
  est.on_click();
  ASSERT_EQ(est.trackers().size(), 1u);
  EXPECT_EQ(est.trackers()[0].state, 1u);
  EXPECT_EQ(est.trackers()[0].prob, 1.0);
}

TEST(Estimator, TextEvidenceRaisesTextStates) {
  const auto m = toy_ab();
  EstimatorConfig cfg;
  cfg.transition_scheme = TransitionScheme::kEqualTransitions;
  auto est = Estimator::init_unknown(m, cfg);
  const double before = est.state_probability(1);
  est.on_evidence({EvidenceKind::kTextInput, 0, 1});
  EXPECT_GT(est.state_probability(1), before);
  EXPECT_LT(est.state_probability(0), 1.0 / 3.0);
  EXPECT_LT(est.state_probability(2), 1.0 / 3.0);
  EXPECT_EQ(est.trackers().size(), 3u);

  auto same = Estimator::init_unknown(m, cfg);
  same.on_evidence({EvidenceKind::kPlainClick, 0, 0});
  EXPECT_LT(same.state_probability(2), 1.0 / 3.0);  // state c has no elements
  auto all = Estimator::init_known(m, 1, std::nullopt, cfg);
  all.on_evidence({EvidenceKind::kTextInput, 0, 1});
  EXPECT_DOUBLE_EQ(all.trackers()[0].prob, 1.0);

  cfg.detection_scale = 0.5;
  auto noop = Estimator::init_unknown(m, cfg);
  noop.on_evidence({EvidenceKind::kTextInput, 0, 1});
  for (const Tracker& t : noop.trackers()) EXPECT_DOUBLE_EQ(t.prob, 1.0 / 3.0);
}

TEST(Estimator, Classify) {
  const std::vector<InputEvent> drag{{0, ButtonDown{}}, {1, MouseMove{{30, 0}}}, {2, ButtonUp{}}};
  EXPECT_EQ(classify(drag)->kind, EvidenceKind::kSliderDrag);
  EXPECT_EQ(classify(drag)->drag_dx, 30);
  const std::vector<InputEvent> click{{0, ButtonDown{}}, {2, ButtonUp{}}};
  EXPECT_EQ(classify(click)->kind, EvidenceKind::kPlainClick);
  const std::vector<InputEvent> key{{0, Key{"7"}}};
  EXPECT_EQ(classify(key)->kind, EvidenceKind::kTextInput);
  const std::vector<InputEvent> nothing{{0, MouseMove{{3, 3}}}, {1, Key{"<Enter>"}}};
  EXPECT_FALSE(classify(nothing).has_value());
  const std::vector<InputEvent> short_drag{{0, ButtonDown{}}, {1, MouseMove{{-9, 40}}}, {2, ButtonUp{}}};
  EXPECT_EQ(classify(short_drag)->kind, EvidenceKind::kPlainClick);
}

TEST(Estimator, APrioriWeights) {
  auto m = std::make_shared<UiModel>(load_model(
      "model_version: 1\nscreen_width: 40\nscreen_height: 10\nstart_state: a\n"
      "states:\n  - id: a\n    elements:\n"
      "      - {id: x, kind: button, rect: [0, 0, 20, 10], transition_to: b, a_priori_weight: 2}\n"
      "      - {id: y, kind: button, rect: [20, 0, 20, 10], transition_to: c, a_priori_weight: 1}\n"
      "  - id: b\n    elements: []\n  - id: c\n    elements: []\n"));
  EstimatorConfig cfg = plain(TransitionScheme::kEqualTransitions);
  cfg.a_priori = true;
  auto est = Estimator::init_known(m, 0, std::nullopt, cfg);
  est.on_click();
  EXPECT_NEAR(est.state_probability(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(est.state_probability(2), 1.0 / 3.0, 1e-12);

  m->states[0].elements[0].a_priori_weight = 1;
  auto eq = Estimator::init_known(m, 0, std::nullopt, cfg);
  eq.on_click();
  EXPECT_NEAR(eq.state_probability(1), 0.5, 1e-12);

  m->states[0].elements[0].a_priori_weight = 0;
  auto zero = Estimator::init_known(m, 0, std::nullopt, cfg);
  zero.on_click();
  EXPECT_EQ(zero.state_probability(1), 0.0);
  EXPECT_EQ(zero.trackers().size(), 1u);
}

TEST(Estimator, AttackReady) {
  const auto m = test::pacemaker();
  const StateIndex program = m->require_state("program");
  auto est = Estimator::init_known(m, program, std::nullopt, {});
  EXPECT_FALSE(est.attack_ready(program));  // full screen region
  est.on_move({-640, -480});
  EXPECT_TRUE(est.attack_ready(program));  // a single point
  EXPECT_FALSE(Estimator::init_unknown(m, {}).attack_ready(program));
  // Smallest attack element on the program screen is 160 x 30.
  EXPECT_EQ(smallest_attack_element(*m, program)->rect.area(), 160 * 30);
}

TEST(Estimator, Collapse) {
  const auto m = test::pacemaker();
  auto est = Estimator::init_unknown(m, {});
  est.collapse();
  ASSERT_EQ(est.trackers().size(), 1u);
  EXPECT_EQ(est.trackers()[0].state, 0u);  // tie goes to the lowest state
  EXPECT_EQ(est.trackers()[0].prob, 1.0);
  est.collapse();
  EXPECT_EQ(est.trackers().size(), 1u);
}

TEST(Estimator, TouchClicksDisambiguate) {
  const auto m = test::pacemaker();
  EstimatorConfig cfg;
  cfg.input_mode = InputMode::kAbsoluteTouch;
  auto est = Estimator::init_unknown(m, cfg);
  // open_program on home, then the rate slider: only program has a slider
  // under that point after a click that lands on open_program.
  est.observe({0, TouchDown{{45, 175}}});
  est.observe({1, TouchUp{{45, 175}}});
  est.observe({2, TouchDown{{300, 230}}});
  est.observe({3, TouchMove{{340, 230}}});
  est.observe({4, TouchUp{{340, 230}}});
  const Estimate e = est.estimate();
  EXPECT_EQ(m->states[e.top_state].id, "program");
  EXPECT_GT(e.top_prob, 0.85);
}

TEST(Estimator, SnapshotListsTrackers) {
  const auto m = toy_ab();
  auto est = Estimator::init_known(m, 0, std::nullopt, {});
  est.on_click();
  const std::string s = est.snapshot();
  EXPECT_NE(s.find("estimator v1"), std::string::npos);
  EXPECT_NE(s.find("tracker b "), std::string::npos);
  EXPECT_NE(s.find("tracker a "), std::string::npos);
}

TEST(Estimator, OverflowLeavesStateUnchanged) {
  EstimatorConfig cfg;
  cfg.max_trackers = 1;
  auto est = Estimator::init_known(toy_ab(), 0, std::nullopt, cfg);
  EXPECT_THROW(est.on_click(), TrackerOverflow);
  EXPECT_EQ(est.trackers().size(), 1u);
  EXPECT_EQ(est.clicks_observed(), 0u);
}

// Per-state probabilities against exhaustive outcome-tree enumeration.
TEST(EstimatorProperty, PosteriorMatchesEnumeration) {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 50; ++i) {
    const auto model = std::make_shared<const UiModel>(oracle::toy_model(rng));
    ASSERT_TRUE(validate(*model).empty()) << validate(*model).front();
    const Trace tr = oracle::toy_trace(rng, *model);
    const std::optional<Point> cursor =
        i % 2 ? std::optional<Point>() : std::optional<Point>(Point{3, 4});
    for (auto scheme : {TransitionScheme::kEqualTransitions, TransitionScheme::kElementArea}) {
      for (bool detect : {false, true}) {
        EstimatorConfig cfg;
        cfg.transition_scheme = scheme;
        cfg.element_detection = detect;
        ASSERT_LE(oracle::posterior_gap(model, tr, cursor, cfg), 1e-9)
            << "model " << i << " " << to_string(scheme) << " detect=" << detect;
      }
    }
  }
}

// With pruning off, the truth is always among the trackers.
TEST(EstimatorProperty, SoundOnSyntheticTraces) {
  const auto m = test::pacemaker();
  EstimatorConfig cfg;
  cfg.prune_epsilon = 0.0;
  for (const CorpusTrace& c : test::corpus(25, 500)) {
    auto est = Estimator::init_known(m, m->start_index(), m->initial_cursor, cfg);
    TerminalState truth = boot_state(*m);
    for (std::size_t i = 0; i < c.trace.events.size(); ++i) {
      est.observe(c.trace.events[i]);
      truth = apply_event(*m, truth, c.trace.events[i]);
      bool found = false;
      for (const Tracker& t : est.trackers())
        found |= t.state == truth.state && t.region.contains(truth.cursor) && t.prob > 0.0;
      ASSERT_TRUE(found) << c.id << " event " << i;
    }
  }
}

}  // namespace
}  // namespace blindtrack
