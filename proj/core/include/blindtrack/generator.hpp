#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "blindtrack/terminal_sim.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"

namespace blindtrack {

/// Synthetic user behaviour.
struct UserProfile {
  /// Fraction of clicks that first land off every element and are then
  /// corrected.
  double error_rate = 0.07;
  /// Clicks per trace: min_clicks plus a log-normal excess chosen so the
  /// total has this mean and standard deviation.
  double mean_clicks = 29.0;
  double sd_clicks = 22.0;
  int min_clicks = 10;
  /// Gap between consecutive gestures, log-normal.
  double gap_median_ms = 2200.0;
  double gap_sigma = 0.45;
  /// Pointing noise as a fraction of the target's half extent.
  double pointing_sd = 0.35;
  int move_step_min_ms = 20;
  int move_step_max_ms = 60;
  double key_interval_ms = 160.0;

  /// Throws std::invalid_argument for out-of-range fields.
  void check() const;
};

/// One scripted goal of the user. Navigation between states is implied.
struct TaskStep {
  enum class Action { kVisit, kClick, kType, kDrag };
  Action action = Action::kClick;
  /// State id for kVisit, element id otherwise.
  std::string target;
  /// Text for kType, number for kDrag.
  std::string value;
};

struct Task {
  std::string name;
  std::vector<TaskStep> steps;
};

/// YAML task file:
///   name: <text>
///   steps:
///     - {visit: <state>}
///     - {click: <element>}
///     - {type: <element>, value: "<text>"}
///     - {drag: <element>, value: <number>}
Task load_task(std::string_view text);
Task load_task_file(const std::string& path);

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic synthetic trace: pure function of its arguments.
/// Throws GenerationError when a goal cannot be reached from the start.
Trace generate(const UiModel& model, const UserProfile& profile, const Task& task,
               std::uint64_t seed);

/// Plain clicks in a relative trace as the terminal sees them (presses
/// released with less than drag_threshold horizontal travel).
std::size_t count_clicks(const UiModel& model, const Trace& trace);

/// Touch version of a relative trace: presses, drags and releases at the
/// true cursor positions, movement dropped, keys kept.
Trace to_touchscreen(const UiModel& model, const Trace& trace,
                     std::optional<TerminalState> boot = {});

}  // namespace blindtrack
