#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack {

/// Element value: sliders hold numbers, text fields hold their text,
/// multiple-choice groups hold the selected option id.
using Value = std::variant<double, std::string>;

std::string format_value(const Value& v, int decimals = -1);
std::optional<double> numeric_value(const Value& v);
/// Numeric comparison (1e-9) when both sides are numeric, else textual.
bool values_equal(const Value& a, const Value& b);

/// Step index selected by a slider when the pointer is at column `x`.
/// The slider maps its pixel columns linearly onto [min, max] and rounds to
/// the step grid; positions outside the rect saturate.
long slider_index_at(const UiElement& slider, int x);
double slider_value_at(const UiElement& slider, int x);
/// Leftmost column whose step index is `index`, if any column maps to it.
std::optional<int> slider_column_for(const UiElement& slider, long index);
long domain_index(const ValueDomain& d, double value);
double domain_value(const ValueDomain& d, long index);

/// True terminal state, including what the blind device never observes.
struct TerminalState {
  StateIndex state = 0;
  Point cursor;
  bool pressed = false;
  /// Pointer position at press time (raw touch coordinates for touch).
  Point press_cursor;
  /// Horizontal travel since the press, summed from raw deltas so that edge
  /// clamping does not change whether a press counts as a click or a drag.
  int press_travel_x = 0;
  std::optional<std::string> dragging;
  std::optional<std::string> focused;
  bool select_all = false;
  /// Current widget values keyed by element id. Elements sharing an id
  /// across states are the same widget.
  std::map<std::string, Value> values;
  /// Values copied in by the last confirmation click.
  std::map<std::string, Value> committed;
  std::size_t events_applied = 0;

  friend bool operator==(const TerminalState&, const TerminalState&) = default;
};

/// Start state, initial cursor (or the origin) and initial widget values.
TerminalState boot_state(const UiModel& model);

/// Deterministic state-transition function of the terminal.
/// Throws std::invalid_argument for a malformed event.
TerminalState apply_event(const UiModel& model, TerminalState t,
                          const InputEvent& e);

/// Boot state followed by the state after each event.
std::vector<TerminalState> run_trace(const UiModel& model, const Trace& trace,
                                     std::optional<TerminalState> boot = {});

/// Canonical text form of the state, used for hashing and diagnostics.
std::string describe(const UiModel& model, const TerminalState& t);
/// 64-bit FNV-1a digest of describe(); equal states hash equal.
std::uint64_t state_digest(const UiModel& model, const TerminalState& t);

/// Stateful wrapper that also keeps the append-only event log.
class Terminal {
 public:
  explicit Terminal(std::shared_ptr<const UiModel> model);
  Terminal(std::shared_ptr<const UiModel> model, TerminalState boot);

  void apply(const InputEvent& e);
  const TerminalState& state() const { return state_; }
  const std::vector<InputEvent>& event_log() const { return log_; }
  const UiModel& model() const { return *model_; }

 private:
  std::shared_ptr<const UiModel> model_;
  TerminalState state_;
  std::vector<InputEvent> log_;
};

}  // namespace blindtrack
