#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "blindtrack/geometry.hpp"

namespace blindtrack {

struct MouseMove {
  Delta d;
  friend bool operator==(const MouseMove&, const MouseMove&) = default;
};
struct ButtonDown {
  friend bool operator==(const ButtonDown&, const ButtonDown&) = default;
};
struct ButtonUp {
  friend bool operator==(const ButtonUp&, const ButtonUp&) = default;
};
/// A key press. `key` is a single printable character or a named key in
/// angle brackets: <BS>, <C-a>, <Space>, <Enter>, <Tab>.
struct Key {
  std::string key;
  bool printable() const { return key.size() == 1; }
  friend bool operator==(const Key&, const Key&) = default;
};
struct TouchDown {
  Point at;
  friend bool operator==(const TouchDown&, const TouchDown&) = default;
};
struct TouchMove {
  Point at;
  friend bool operator==(const TouchMove&, const TouchMove&) = default;
};
struct TouchUp {
  Point at;
  friend bool operator==(const TouchUp&, const TouchUp&) = default;
};
/// Session-start marker: the terminal has just booted into its start state.
struct Boot {
  friend bool operator==(const Boot&, const Boot&) = default;
};

using EventPayload = std::variant<MouseMove, ButtonDown, ButtonUp, Key,
                                  TouchDown, TouchMove, TouchUp, Boot>;

struct InputEvent {
  std::int64_t t_ms = 0;
  EventPayload payload;

  bool is_relative() const;
  bool is_absolute() const;

  friend bool operator==(const InputEvent&, const InputEvent&) = default;
};

enum class InputMode { kRelativeMouse, kAbsoluteTouch };

std::string_view to_string(InputMode mode);
std::optional<InputMode> input_mode_from_string(std::string_view text);

struct TraceMeta {
  std::string model;
  InputMode mode = InputMode::kRelativeMouse;
  std::optional<std::uint64_t> seed;
  std::string task;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<InputEvent> events;

  friend bool operator==(const Trace&, const Trace&) = default;
};

class TraceError : public std::runtime_error {
 public:
  /// `index` is the offending event index, or -1 for header problems.
  TraceError(long index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

/// One event as a trace line: "<t_ms> <kind> [args]".
std::string format_event(const InputEvent& e);
/// Parses a single event line. Throws TraceError(index, ...).
InputEvent parse_event(std::string_view line, long index = -1);

/// Line-oriented trace text: "@key value" header lines, then one event
/// per line. Rejects fractional deltas, mixed input modes and timestamp
/// regressions.
Trace parse_trace(std::string_view text);
std::string serialize_trace(const Trace& trace);
Trace load_trace_file(const std::string& path);
void save_trace_file(const Trace& trace, const std::string& path);

/// Checks the structural invariants of an in-memory trace.
void check_trace(const Trace& trace);

/// Number of mouse or touch button releases in the trace.
std::size_t count_releases(const Trace& trace);

}  // namespace blindtrack
