#include "blindtrack/ui_model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace blindtrack {

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::kButton:
      return "button";
    case ElementKind::kTextField:
      return "text_field";
    case ElementKind::kSlider:
      return "slider";
    case ElementKind::kMultipleChoice:
      return "multiple_choice";
  }
  return "button";
}

std::optional<ElementKind> element_kind_from_string(std::string_view text) {
  if (text == "button") return ElementKind::kButton;
  if (text == "text_field") return ElementKind::kTextField;
  if (text == "slider") return ElementKind::kSlider;
  if (text == "multiple_choice") return ElementKind::kMultipleChoice;
  return std::nullopt;
}

long ValueDomain::steps() const {
  if (step <= 0.0) return 0;
  return std::lround((max - min) / step);
}

int ValueDomain::decimals() const {
  for (int d = 0; d < 9; ++d) {
    const double scaled = step * std::pow(10.0, d);
    if (std::fabs(scaled - std::round(scaled)) < 1e-9) return d;
  }
  return 9;
}

const UiElement* UiState::find(std::string_view element_id) const {
  for (const UiElement& e : elements) {
    if (e.id == element_id) return &e;
  }
  return nullptr;
}

std::optional<StateIndex> UiModel::state_index(std::string_view id) const {
  for (StateIndex i = 0; i < states.size(); ++i) {
    if (states[i].id == id) return i;
  }
  return std::nullopt;
}

StateIndex UiModel::require_state(std::string_view id) const {
  auto idx = state_index(id);
  if (!idx) throw std::out_of_range("unknown state '" + std::string(id) + "'");
  return *idx;
}

bool UiModel::is_target_state(StateIndex i) const {
  return std::find(target_states.begin(), target_states.end(), states.at(i).id) !=
         target_states.end();
}

StateIndex UiModel::destination(const UiElement& e) const {
  return require_state(e.transition_to.value());
}

std::vector<std::string> validate(const UiModel& model) {
  std::vector<std::string> out;
  auto violation = [&out](std::string text) { out.push_back(std::move(text)); };

  if (model.screen_width <= 0 || model.screen_height <= 0) {
    violation("screen: dimensions must be strictly positive");
  }
  if (model.drag_threshold < 1) {
    violation("drag_threshold: must be at least 1 pixel");
  }
  const Rect screen = model.screen();

  std::set<std::string> state_ids;
  for (const UiState& s : model.states) {
    if (s.id.empty()) violation("state: empty state id");
    if (!state_ids.insert(s.id).second) {
      violation("state '" + s.id + "': duplicate state id");
    }
  }
  if (!state_ids.count(model.start_state)) {
    violation("start_state '" + model.start_state + "': no such state");
  }
  for (const std::string& t : model.target_states) {
    if (!state_ids.count(t)) violation("target_state '" + t + "': no such state");
  }
  if (model.initial_cursor && !screen.contains(*model.initial_cursor)) {
    violation("initial_cursor: outside the screen");
  }

  struct WidgetShape {
    ElementKind kind;
    std::optional<ValueDomain> domain;
    std::string where;
  };
  std::map<std::string, WidgetShape> widgets;

  for (const UiState& s : model.states) {
    std::set<std::string> element_ids;
    std::vector<const UiElement*> transitions;
    for (const UiElement& e : s.elements) {
      const std::string where = "state '" + s.id + "' element '" + e.id + "'";
      if (e.id.empty()) violation("state '" + s.id + "': empty element id");
      if (!element_ids.insert(e.id).second) {
        violation(where + ": duplicate element id within state");
      }
      if (e.rect.w < 0 || e.rect.h < 0) {
        violation(where + ": negative rect size");
      } else if (!screen.empty() && !screen.contains(e.rect)) {
        violation(where + ": rect extends past the screen");
      }
      const bool transition_kind = e.kind == ElementKind::kButton ||
                                   e.kind == ElementKind::kMultipleChoice;
      if (e.transition_to) {
        if (!transition_kind) {
          violation(where + ": only buttons and multiple_choice options may "
                            "carry transition_to");
        }
        if (!state_ids.count(*e.transition_to)) {
          violation(where + ": transition_to '" + *e.transition_to +
                    "' names no state");
        }
        transitions.push_back(&e);
      }
      const bool valued = e.kind == ElementKind::kTextField ||
                          e.kind == ElementKind::kSlider;
      if (valued != e.value_domain.has_value()) {
        violation(where + ": value_domain must be present exactly for "
                          "text_field and slider");
      }
      if (e.value_domain) {
        const ValueDomain& d = *e.value_domain;
        if (!(d.step > 0.0) || !(d.min <= d.max) || !std::isfinite(d.min) ||
            !std::isfinite(d.max)) {
          violation(where + ": value_domain needs min <= max and step > 0");
        }
      }
      if (e.is_confirmation && e.kind != ElementKind::kButton) {
        violation(where + ": confirmation element must be a button");
      }
      if (!(e.a_priori_weight >= 0.0) || !std::isfinite(e.a_priori_weight)) {
        violation(where + ": a_priori_weight must be finite and nonnegative");
      }
      if (!e.clear_keys.empty() && e.kind != ElementKind::kTextField) {
        violation(where + ": clear_keys only apply to text fields");
      }
      auto [it, inserted] = widgets.try_emplace(e.id, WidgetShape{e.kind, e.value_domain, where});
      if (!inserted && (it->second.kind != e.kind || it->second.domain != e.value_domain)) {
        violation(where + ": shares its id with " + it->second.where +
                  " but differs in kind or value_domain");
      }
    }
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      for (std::size_t j = i + 1; j < transitions.size(); ++j) {
        if (transitions[i]->rect.intersects(transitions[j]->rect)) {
          violation("state '" + s.id + "' elements '" + transitions[i]->id +
                    "' and '" + transitions[j]->id +
                    "': overlapping transition-bearing rects (non-deterministic)");
        }
      }
    }
  }
  return out;
}

namespace {

[[noreturn]] void syntax(const std::string& what) {
  throw ModelError(ModelError::Kind::kSyntax, what);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    syntax(where + ": unexpected value type");
  }
}

YAML::Node require(const YAML::Node& parent, const char* key,
                   const std::string& where) {
  YAML::Node n = parent[key];
  if (!n) syntax(where + ": missing '" + key + "'");
  return n;
}

Rect parse_rect(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() != 4) syntax(where + ": rect must be [x, y, w, h]");
  return {scalar<int>(n[0], where), scalar<int>(n[1], where),
          scalar<int>(n[2], where), scalar<int>(n[3], where)};
}

UiElement parse_element(const YAML::Node& n, const std::string& state) {
  if (!n.IsMap()) syntax("state '" + state + "': element must be a mapping");
  UiElement e;
  e.id = scalar<std::string>(require(n, "id", "state '" + state + "' element"),
                             "element id");
  const std::string where = "state '" + state + "' element '" + e.id + "'";
  const auto kind_text = scalar<std::string>(require(n, "kind", where), where);
  auto kind = element_kind_from_string(kind_text);
  if (!kind) syntax(where + ": unknown kind '" + kind_text + "'");
  e.kind = *kind;
  e.rect = parse_rect(require(n, "rect", where), where);
  if (n["transition_to"]) e.transition_to = scalar<std::string>(n["transition_to"], where);
  if (n["is_target"]) e.is_target = scalar<bool>(n["is_target"], where);
  if (n["is_confirmation"]) e.is_confirmation = scalar<bool>(n["is_confirmation"], where);
  if (n["a_priori_weight"]) e.a_priori_weight = scalar<double>(n["a_priori_weight"], where);
  if (const YAML::Node d = n["value_domain"]) {
    if (!d.IsMap()) syntax(where + ": value_domain must be a mapping");
    e.value_domain = ValueDomain{scalar<double>(require(d, "min", where), where),
                                 scalar<double>(require(d, "max", where), where),
                                 scalar<double>(require(d, "step", where), where)};
  }
  if (const YAML::Node k = n["clear_keys"]) {
    if (!k.IsSequence()) syntax(where + ": clear_keys must be a list");
    for (const auto& key : k) e.clear_keys.push_back(scalar<std::string>(key, where));
  }
  if (n["initial_value"]) e.initial_value = scalar<std::string>(n["initial_value"], where);
  if (n["group"]) e.group = scalar<std::string>(n["group"], where);
  return e;
}

}  // namespace

UiModel load_model(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& ex) {
    syntax(std::string("malformed model document: ") + ex.what());
  }
  if (!root.IsMap()) syntax("model document must be a mapping");
  const int version = scalar<int>(require(root, "model_version", "model"), "model_version");
  if (version != 1) syntax("unsupported model_version " + std::to_string(version));

  UiModel m;
  if (root["name"]) m.name = scalar<std::string>(root["name"], "name");
  m.screen_width = scalar<int>(require(root, "screen_width", "model"), "screen_width");
  m.screen_height = scalar<int>(require(root, "screen_height", "model"), "screen_height");
  m.start_state = scalar<std::string>(require(root, "start_state", "model"), "start_state");
  if (const YAML::Node t = root["target_states"]) {
    if (!t.IsSequence()) syntax("target_states must be a list");
    for (const auto& s : t) m.target_states.push_back(scalar<std::string>(s, "target_states"));
  }
  if (const YAML::Node c = root["initial_cursor"]) {
    if (!c.IsSequence() || c.size() != 2) syntax("initial_cursor must be [x, y]");
    m.initial_cursor = Point{scalar<int>(c[0], "initial_cursor"),
                             scalar<int>(c[1], "initial_cursor")};
  }
  if (root["drag_threshold"]) {
    m.drag_threshold = scalar<int>(root["drag_threshold"], "drag_threshold");
  }
  const YAML::Node states = require(root, "states", "model");
  if (!states.IsSequence()) syntax("states must be a list");
  for (const auto& sn : states) {
    if (!sn.IsMap()) syntax("state must be a mapping");
    UiState s;
    s.id = scalar<std::string>(require(sn, "id", "state"), "state id");
    if (const YAML::Node els = sn["elements"]) {
      if (!els.IsSequence()) syntax("state '" + s.id + "': elements must be a list");
      for (const auto& en : els) s.elements.push_back(parse_element(en, s.id));
    }
    m.states.push_back(std::move(s));
  }

  const std::vector<std::string> problems = validate(m);
  if (!problems.empty()) {
    std::string msg = "invalid model: " + problems.front();
    if (problems.size() > 1) {
      msg += " (and " + std::to_string(problems.size() - 1) + " more)";
    }
    throw ModelError(ModelError::Kind::kSemantic, msg);
  }
  return m;
}

UiModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

std::string serialize_model(const UiModel& m) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "model_version" << YAML::Value << 1;
  if (!m.name.empty()) out << YAML::Key << "name" << YAML::Value << m.name;
  out << YAML::Key << "screen_width" << YAML::Value << m.screen_width;
  out << YAML::Key << "screen_height" << YAML::Value << m.screen_height;
  out << YAML::Key << "start_state" << YAML::Value << m.start_state;
  out << YAML::Key << "target_states" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& t : m.target_states) out << t;
  out << YAML::EndSeq;
  if (m.initial_cursor) {
    out << YAML::Key << "initial_cursor" << YAML::Value << YAML::Flow << YAML::BeginSeq
        << m.initial_cursor->x << m.initial_cursor->y << YAML::EndSeq;
  }
  out << YAML::Key << "drag_threshold" << YAML::Value << m.drag_threshold;
  out << YAML::Key << "states" << YAML::Value << YAML::BeginSeq;
  for (const UiState& s : m.states) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << s.id;
    out << YAML::Key << "elements" << YAML::Value << YAML::BeginSeq;
    for (const UiElement& e : s.elements) {
      out << YAML::BeginMap;
      out << YAML::Key << "id" << YAML::Value << e.id;
      out << YAML::Key << "kind" << YAML::Value << std::string(to_string(e.kind));
      out << YAML::Key << "rect" << YAML::Value << YAML::Flow << YAML::BeginSeq
          << e.rect.x << e.rect.y << e.rect.w << e.rect.h << YAML::EndSeq;
      if (e.transition_to) out << YAML::Key << "transition_to" << YAML::Value << *e.transition_to;
      if (e.is_target) out << YAML::Key << "is_target" << YAML::Value << true;
      if (e.is_confirmation) out << YAML::Key << "is_confirmation" << YAML::Value << true;
      if (e.value_domain) {
        out << YAML::Key << "value_domain" << YAML::Value << YAML::Flow << YAML::BeginMap
            << YAML::Key << "min" << YAML::Value << e.value_domain->min
            << YAML::Key << "max" << YAML::Value << e.value_domain->max
            << YAML::Key << "step" << YAML::Value << e.value_domain->step << YAML::EndMap;
      }
      if (e.a_priori_weight != 1.0) {
        out << YAML::Key << "a_priori_weight" << YAML::Value << e.a_priori_weight;
      }
      if (!e.clear_keys.empty()) {
        out << YAML::Key << "clear_keys" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& k : e.clear_keys) out << YAML::DoubleQuoted << k;
        out << YAML::EndSeq;
      }
      if (e.initial_value) {
        out << YAML::Key << "initial_value" << YAML::Value << YAML::DoubleQuoted << *e.initial_value;
      }
      if (e.group) out << YAML::Key << "group" << YAML::Value << *e.group;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

const UiElement* element_at(const UiModel& model, StateIndex state, Point p) {
  const UiState& s = model.states.at(state);
  const UiElement* fallback = nullptr;
  for (const UiElement& e : s.elements) {
    if (!e.rect.contains(p)) continue;
    if (e.has_transition()) return &e;
    if (!fallback) fallback = &e;
  }
  return fallback;
}

const UiElement* element_at(const UiModel& model, std::string_view state,
                            Point p) {
  return element_at(model, model.require_state(state), p);
}

WeightTable load_weights(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& ex) {
    syntax(std::string("malformed weights document: ") + ex.what());
  }
  WeightTable table;
  const YAML::Node weights = require(root, "weights", "weights file");
  if (!weights.IsMap()) syntax("weights must map state -> {element: weight}");
  for (const auto& st : weights) {
    const auto state = scalar<std::string>(st.first, "weights");
    if (!st.second.IsMap()) syntax("weights for '" + state + "' must be a mapping");
    for (const auto& el : st.second) {
      table.entries.push_back({state, scalar<std::string>(el.first, "weights"),
                               scalar<double>(el.second, "weights")});
    }
  }
  return table;
}

std::string serialize_weights(const WeightTable& table) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  std::size_t i = 0;
  while (i < table.entries.size()) {
    const std::string& state = table.entries[i].state;
    out << YAML::Key << state << YAML::Value << YAML::BeginMap;
    while (i < table.entries.size() && table.entries[i].state == state) {
      out << YAML::Key << table.entries[i].element << YAML::Value
          << table.entries[i].weight;
      ++i;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

UiModel with_weights(const UiModel& model, const WeightTable& table) {
  UiModel m = model;
  for (const auto& entry : table.entries) {
    auto idx = m.state_index(entry.state);
    if (!idx) continue;
    for (UiElement& e : m.states[*idx].elements) {
      if (e.id == entry.element) e.a_priori_weight = entry.weight;
    }
  }
  return m;
}

}  // namespace blindtrack
