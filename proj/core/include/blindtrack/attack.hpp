#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "blindtrack/estimator.hpp"
#include "blindtrack/terminal_sim.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack {

enum class AttackVariant { kElementDriven, kConfirmationDriven };

std::string_view to_string(AttackVariant v);
std::optional<AttackVariant> attack_variant_from_string(std::string_view text);

struct AttackSpec {
  AttackVariant variant = AttackVariant::kConfirmationDriven;
  std::string target_element;
  Value malicious_value = 0.0;
  std::int64_t step_interval_ms = 10;
  std::int64_t element_wait_ms = 1000;
  /// Defaults to the model's first target state.
  std::string target_state;
};

/// Compact text form: "<variant>:<element>=<value>@<step_ms>[,wait=<ms>]",
/// e.g. "confirmation:rate=180@10". Variants: element, confirmation.
AttackSpec parse_attack_spec(std::string_view text);
std::string format_attack_spec(const AttackSpec& spec);

/// Throws std::invalid_argument when the spec does not fit the model.
void check_attack_spec(const UiModel& model, const AttackSpec& spec);

struct Pass {
  InputEvent event;
};
struct Block {
  InputEvent event;
};
struct Inject {
  std::vector<InputEvent> events;
  /// Re-sends held user events unchanged; not part of an attack.
  bool replay = false;
};
struct Delay {
  InputEvent event;
  std::int64_t ms = 0;
};
using InterposerDecision = std::variant<Pass, Block, Inject, Delay>;

/// One decision-log line:
///   pass <event> | block <event> | delay <ms> <event>
///   inject <n> | <ev> ; <ev> ...   (replay <n> | ... for held user events)
std::string format_decision(const InterposerDecision& d);

/// Events the terminal receives because of a decision, in order.
std::vector<InputEvent> applied_events(const InterposerDecision& d);

struct AttackOutcome {
  bool launched = false;
  /// Committed target value equals the malicious value.
  bool success = false;
  /// Time the target value on the terminal differed from what the user set.
  std::int64_t visible_ms = 0;
  std::size_t injected_event_count = 0;
  /// Final shown value equals the user's own value.
  bool restored = false;
  /// Every attack injection left the true cursor where it found it.
  bool net_zero = true;
  std::vector<std::string> decision_log;
};

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative moves, chunked to at most 127 px per axis per event.
std::vector<InputEvent> move_events(Delta d);

/// Moves totalling (-screen_width, -screen_height): any cursor ends at (0,0).
std::vector<InputEvent> corner_sweep(const Rect& screen);

/// Sets `element` to `value` from any cursor position in `from_region` and
/// returns the cursor to where it started. Timestamps are left at 0.
/// Throws PlanError("region too large") when the landing cannot be
/// guaranteed.
std::vector<InputEvent> value_injection_plan(const UiModel& model, StateIndex state,
                                             const UiElement& element,
                                             const Region& from_region, const Value& value);

/// Re-drags a slider to the x of an earlier release point, given the exact
/// cursor displacement `since_release` from that point to now.
std::vector<InputEvent> slider_restore_plan(const UiModel& model, const UiElement& slider,
                                            const Region& from_region, Delta since_release);

/// Interposer for one ordered event stream.
class AttackSession {
 public:
  AttackSession(std::shared_ptr<const UiModel> model, AttackSpec spec,
                EstimatorConfig cfg = {});

  /// Decisions for one user event, in the order they take effect.
  std::vector<InterposerDecision> interpose(const InputEvent& e);
  /// Fires a pending element-driven strike at stream end, if due.
  std::vector<InterposerDecision> finish();

  const Estimator& estimator() const { return est_; }
  const AttackSpec& spec() const { return spec_; }
  bool launched() const { return launched_; }
  std::size_t injected_event_count() const { return injected_; }
  const std::vector<std::string>& decision_log() const { return log_; }

 private:
  struct Anchor {
    bool valid = false;
    Delta since;
  };
  struct Shadow {
    bool known = false;
    std::string text;
    bool select_all = false;
    bool select_known = false;
  };
  enum class Focus { kUnknown, kTarget, kElsewhere };
  enum class Tri { kNo, kMaybe, kYes };

  void record(std::vector<InterposerDecision>& out, InterposerDecision d);
  void feed(const InputEvent& e, bool user);
  void deliver(std::vector<InterposerDecision>& out, const InputEvent& e);
  void replay_held(std::vector<InterposerDecision>& out, std::int64_t at);
  void launch(std::vector<InterposerDecision>& out, std::vector<InputEvent> plan,
              std::int64_t at);
  bool certain() const;
  std::optional<Rect> target_bbox() const;
  Tri press_on(const Region& r, const Rect& rect) const;
  void try_element_strike(std::vector<InterposerDecision>& out, std::int64_t at);
  std::optional<std::vector<InputEvent>> confirmation_plan() const;
  std::optional<std::vector<InputEvent>> restore_plan(const Region& from) const;
  void shadow_key(const std::string& key);

  std::shared_ptr<const UiModel> model_;
  AttackSpec spec_;
  StateIndex target_state_ = 0;
  const UiElement* target_ = nullptr;
  const UiElement* confirm_ = nullptr;
  Estimator est_;

  std::int64_t busy_until_ = 0;
  bool launched_ = false;
  std::size_t injected_ = 0;
  std::vector<std::string> log_;

  // Confirmation-driven: held user press and the injection prepared for it.
  std::optional<InputEvent> held_down_;
  std::vector<InputEvent> held_plan_;

  // Element-driven: time the strike is due.
  std::optional<std::int64_t> fire_at_;

  // What the delivered user stream says about the user's own value.
  Tri press_target_ = Tri::kNo;
  Tri press_slider_ = Tri::kNo;
  bool press_other_slider_ = false;
  Anchor anchor_;
  Shadow shadow_;
  Focus focus_ = Focus::kElsewhere;
};

/// Incremental attack run: interposes user events, drives the oracle with
/// the delivered stream and keeps an unattacked replay for comparison.
class AttackRun {
 public:
  AttackRun(std::shared_ptr<const UiModel> model, AttackSpec spec,
            std::optional<TerminalState> boot = {}, EstimatorConfig cfg = {});

  std::vector<InterposerDecision> push(const InputEvent& e);
  std::vector<InterposerDecision> finish();
  AttackOutcome outcome() const;

  const AttackSession& session() const { return session_; }
  /// Oracle state after the delivered stream.
  const TerminalState& terminal() const { return terminal_; }
  /// Oracle state after the user's events alone.
  const TerminalState& baseline() const { return baseline_; }

 private:
  void take(const std::vector<InterposerDecision>& ds, bool consumed);
  const Value* shown() const;

  std::shared_ptr<const UiModel> model_;
  AttackSession session_;
  TerminalState terminal_;
  TerminalState baseline_;
  TerminalState baseline_before_;
  bool net_zero_ = true;
  std::int64_t visible_ms_ = 0;
  std::optional<std::int64_t> last_t_;
  bool last_differs_ = false;
};

/// Feeds `trace` through an AttackRun and reports the outcome.
AttackOutcome run_attack(const std::shared_ptr<const UiModel>& model, const Trace& trace,
                         const AttackSpec& spec, std::optional<TerminalState> boot = {},
                         EstimatorConfig cfg = {});

}  // namespace blindtrack
