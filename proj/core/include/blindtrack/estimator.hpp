#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "blindtrack/geometry.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack {

enum class TransitionScheme { kEqualTransitions, kElementArea };

std::string_view to_string(TransitionScheme s);
std::optional<TransitionScheme> transition_scheme_from_string(std::string_view text);

struct EstimatorConfig {
  TransitionScheme transition_scheme = TransitionScheme::kElementArea;
  bool element_detection = true;
  /// Weight kept by trackers consistent with a detected gesture; the others
  /// keep (1 - detection_scale). 0.5 makes evidence a no-op.
  double detection_scale = 0.95;
  /// Weight transition outcomes by UiElement::a_priori_weight.
  bool a_priori = false;
  double target_prob_threshold = 0.9;
  InputMode input_mode = InputMode::kRelativeMouse;
  double prune_epsilon = 1e-12;
  std::size_t max_trackers = 100000;
  /// Horizontal press travel that turns a press into a slider drag.
  int drag_threshold = 10;
  /// Merge trackers sharing a state after every click (union of regions,
  /// sum of probabilities). Off by default.
  bool merge_same_state = false;

  /// Throws std::invalid_argument when a field is out of range.
  void check() const;
};

/// One (state, pointer uncertainty area, probability) hypothesis.
struct Tracker {
  StateIndex state = 0;
  Region region;
  double prob = 0.0;
};

enum class EvidenceKind { kSliderDrag, kTextInput, kPlainClick };

std::string_view to_string(EvidenceKind kind);

struct Evidence {
  EvidenceKind kind = EvidenceKind::kPlainClick;
  /// Horizontal press travel for drags and clicks.
  int drag_dx = 0;
  /// Printable keys in the burst for text input.
  int key_count = 0;
};

struct Estimate {
  /// Indexed by StateIndex; sums to 1.
  std::vector<double> state_probs;
  StateIndex top_state = 0;
  double top_prob = 0.0;
  /// Union of the regions of all trackers in top_state.
  Region combined_region;
  std::size_t tracker_count = 0;
};

/// Raised when a click would grow the tracker list past max_trackers. The
/// estimator is left unchanged; callers may collapse() and retry.
class TrackerOverflow : public std::runtime_error {
 public:
  TrackerOverflow(std::size_t wanted, std::size_t limit);
  std::size_t wanted() const { return wanted_; }

 private:
  std::size_t wanted_;
};

/// Classifies a complete gesture window:
///   press, horizontal travel >= drag_threshold, release -> slider drag
///   press, release with smaller travel                  -> plain click
///   any printable key                                   -> text input
std::optional<Evidence> classify(std::span<const InputEvent> window,
                                 int drag_threshold = 10);

/// What the estimator made of one observed event.
struct Observation {
  bool click = false;
  std::optional<Evidence> evidence;
  bool rebooted = false;
};

class Estimator {
 public:
  /// Single tracker with probability 1. Without a cursor the uncertainty
  /// area is the whole screen.
  static Estimator init_known(std::shared_ptr<const UiModel> model, StateIndex state,
                              std::optional<Point> cursor, EstimatorConfig cfg);
  /// One full-screen tracker per state, equal probabilities.
  static Estimator init_unknown(std::shared_ptr<const UiModel> model,
                                EstimatorConfig cfg);

  void on_move(Delta d);
  /// Expands every tracker into its possible click outcomes. `at` is the
  /// absolute touch point and must be given exactly in touch mode.
  void on_click(std::optional<Point> at = std::nullopt);
  /// Plain-click evidence right after on_click is judged in the state the
  /// click happened in: transition children hit their button, stay children
  /// hit an element iff their region meets a non-transition element.
  void on_evidence(const Evidence& ev);
  Estimate estimate() const;
  double state_probability(StateIndex s) const;
  /// Union of the regions of trackers in state `s`.
  Region state_region(StateIndex s) const;
  /// Target state identified with enough probability and its pointer
  /// uncertainty small enough to hit the smallest target or confirmation
  /// element.
  bool attack_ready(StateIndex target_state) const;
  /// Keeps only the most likely tracker (ties: lowest state, then smallest
  /// area, then region text) and gives it probability 1.
  void collapse();

  /// Event-driven entry point: moves, press/release classification, key
  /// bursts and boot markers.
  Observation observe(const InputEvent& e);

  std::span<const Tracker> trackers() const { return trackers_; }
  const EstimatorConfig& config() const { return cfg_; }
  const UiModel& model() const { return *model_; }
  const std::shared_ptr<const UiModel>& model_ptr() const { return model_; }
  std::size_t events_observed() const { return events_; }
  std::size_t clicks_observed() const { return clicks_; }
  bool pressed() const { return pressed_; }

  /// Text snapshot: config echo, event counter, one line per tracker.
  std::string snapshot() const;

 private:
  Estimator(std::shared_ptr<const UiModel> model, EstimatorConfig cfg);

  void scale(const std::vector<char>& consistent);
  void normalize_and_prune();
  bool consistent(const Tracker& t, EvidenceKind kind) const;
  void merge_states();

  std::shared_ptr<const UiModel> model_;
  EstimatorConfig cfg_;
  std::vector<Tracker> trackers_;
  // Per tracker: whether its last click landed on an element of the state
  // it was clicked in. Parallel to trackers_ right after on_click.
  std::vector<char> click_hit_;
  // Gesture classification state.
  bool pressed_ = false;
  int press_x_ = 0;
  int travel_x_ = 0;
  bool in_key_burst_ = false;
  std::vector<char> slider_at_press_;
  std::size_t events_ = 0;
  std::size_t clicks_ = 0;
};

/// Smallest-area target or confirmation element of a state, if any.
const UiElement* smallest_attack_element(const UiModel& model, StateIndex state);

}  // namespace blindtrack
