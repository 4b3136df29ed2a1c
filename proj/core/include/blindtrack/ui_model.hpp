#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "blindtrack/geometry.hpp"

namespace blindtrack {

/// Position of a state in UiModel::states. Ordering of state indices is the
/// "lowest state id" used for deterministic tie-breaking.
using StateIndex = std::size_t;

enum class ElementKind { kButton, kTextField, kSlider, kMultipleChoice };

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from_string(std::string_view text);

/// Numeric range of a slider or text field.
struct ValueDomain {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  /// Number of steps between min and max.
  long steps() const;
  /// Decimal places needed to print values on the step grid.
  int decimals() const;

  friend bool operator==(const ValueDomain&, const ValueDomain&) = default;
};

struct UiElement {
  std::string id;
  Rect rect;
  ElementKind kind = ElementKind::kButton;
  std::optional<std::string> transition_to;
  bool is_target = false;
  bool is_confirmation = false;
  std::optional<ValueDomain> value_domain;
  double a_priori_weight = 1.0;
  /// Keys that clear a text field's content (select-all convention).
  std::vector<std::string> clear_keys;
  /// Value shown before the user edits the element; sliders default to
  /// the domain minimum, text fields to "".
  std::optional<std::string> initial_value;
  /// Mutually exclusive option group of a multiple_choice element.
  std::optional<std::string> group;

  bool has_transition() const { return transition_to.has_value(); }

  friend bool operator==(const UiElement&, const UiElement&) = default;
};

struct UiState {
  std::string id;
  std::vector<UiElement> elements;

  const UiElement* find(std::string_view element_id) const;

  friend bool operator==(const UiState&, const UiState&) = default;
};

/// Static model of the terminal's user interface. Immutable once loaded.
struct UiModel {
  int screen_width = 0;
  int screen_height = 0;
  std::vector<UiState> states;
  std::string start_state;
  std::vector<std::string> target_states;
  std::optional<Point> initial_cursor;
  /// Horizontal press-to-release displacement (pixels) from which the
  /// terminal treats a press as a drag rather than a click.
  int drag_threshold = 10;
  std::string name;

  Rect screen() const { return {0, 0, screen_width, screen_height}; }
  std::optional<StateIndex> state_index(std::string_view id) const;
  StateIndex require_state(std::string_view id) const;
  StateIndex start_index() const { return require_state(start_state); }
  const UiState& state(StateIndex i) const { return states.at(i); }
  bool is_target_state(StateIndex i) const;
  /// Destination of a transition-bearing element. Requires a valid model.
  StateIndex destination(const UiElement& e) const;

  friend bool operator==(const UiModel&, const UiModel&) = default;
};

class ModelError : public std::runtime_error {
 public:
  enum class Kind { kSyntax, kSemantic };
  ModelError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Lists every invariant violation, each naming the offending state and
/// element. Empty iff the model is valid.
std::vector<std::string> validate(const UiModel& model);

/// Parses the model file format (model_version: 1). Throws ModelError.
UiModel load_model(std::string_view text);
UiModel load_model_file(const std::string& path);
std::string serialize_model(const UiModel& model);

/// Element hit by a click at `p`: the transition-bearing element containing
/// p if any, else the first other element containing p.
/// Throws std::out_of_range for an unknown state.
const UiElement* element_at(const UiModel& model, StateIndex state, Point p);
const UiElement* element_at(const UiModel& model, std::string_view state,
                            Point p);

/// Per-state, per-element interaction weights ("a priori" table).
struct WeightTable {
  struct Entry {
    std::string state;
    std::string element;
    double weight = 1.0;
  };
  std::vector<Entry> entries;
};

WeightTable load_weights(std::string_view text);
std::string serialize_weights(const WeightTable& table);
/// Copy of `model` with a_priori_weight overwritten from the table.
UiModel with_weights(const UiModel& model, const WeightTable& table);

}  // namespace blindtrack
