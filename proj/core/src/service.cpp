#include "blindtrack/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <thread>

#include "blindtrack/terminal_sim.hpp"

namespace blindtrack {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_session_counter{0};

class Fault : public std::runtime_error {
 public:
  Fault(std::string code, const std::string& what, bool fatal = true)
      : std::runtime_error(what), code_(std::move(code)), fatal_(fatal) {}
  const std::string& code() const { return code_; }
  bool fatal() const { return fatal_; }

 private:
  std::string code_;
  bool fatal_;
};

json frame(std::string_view type) { return json{{"proto", kProtocolVersion}, {"type", type}}; }

Value value_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Fault("bad_spec", "malicious_value must be a number or a string");
}

json value_to_json(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

AttackSpec spec_from_json(const json& j) {
  try {
    if (j.is_string()) return parse_attack_spec(j.get<std::string>());
    if (!j.is_object()) throw Fault("bad_spec", "spec must be a string or an object");
    AttackSpec s;
    const auto variant = attack_variant_from_string(j.at("variant").get<std::string>());
    if (!variant) throw Fault("bad_spec", "unknown variant");
    s.variant = *variant;
    s.target_element = j.at("target_element").get<std::string>();
    s.malicious_value = value_from_json(j.at("malicious_value"));
    s.step_interval_ms = j.value("step_interval_ms", s.step_interval_ms);
    s.element_wait_ms = j.value("element_wait_ms", s.element_wait_ms);
    s.target_state = j.value("target_state", s.target_state);
    return s;
  } catch (const Fault&) {
    throw;
  } catch (const std::exception& e) {
    throw Fault("bad_spec", e.what());
  }
}

EstimatorConfig config_from_json(const json& j) {
  EstimatorConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Fault("bad_config", "config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scheme") {
        const auto s = transition_scheme_from_string(v.get<std::string>());
        if (!s) throw Fault("bad_config", "unknown scheme");
        c.transition_scheme = *s;
      } else if (key == "detection") {
        c.element_detection = v.get<bool>();
      } else if (key == "scale") {
        c.detection_scale = v.get<double>();
      } else if (key == "apriori") {
        c.a_priori = v.get<bool>();
      } else if (key == "threshold") {
        c.target_prob_threshold = v.get<double>();
      } else if (key == "prune") {
        c.prune_epsilon = v.get<double>();
      } else if (key == "max_trackers") {
        c.max_trackers = v.get<std::size_t>();
      } else if (key == "drag_threshold") {
        c.drag_threshold = v.get<int>();
      } else if (key == "merge") {
        c.merge_same_state = v.get<bool>();
      } else {
        throw Fault("bad_config", "unknown config key '" + key + "'");
      }
    }
    c.check();
  } catch (const Fault&) {
    throw;
  } catch (const std::exception& e) {
    throw Fault("bad_config", e.what());
  }
  return c;
}

json config_to_json(const EstimatorConfig& c) {
  return json{{"scheme", to_string(c.transition_scheme)},
              {"detection", c.element_detection},
              {"scale", c.detection_scale},
              {"apriori", c.a_priori},
              {"threshold", c.target_prob_threshold},
              {"prune", c.prune_epsilon},
              {"max_trackers", c.max_trackers},
              {"drag_threshold", c.drag_threshold},
              {"merge", c.merge_same_state}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void ModelRegistry::add(std::shared_ptr<const UiModel> model, std::string id) {
  if (id.empty()) id = model->name;
  if (id.empty()) throw std::invalid_argument("model needs an id");
  models_[id] = std::move(model);
}

std::size_t ModelRegistry::load_dir(const std::string& dir) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".model") continue;
    auto model = std::make_shared<const UiModel>(load_model_file(entry.path().string()));
    const std::string stem = entry.path().stem().string();
    if (!model->name.empty() && model->name != stem) add(model, model->name);
    add(std::move(model), stem);
    ++n;
  }
  return n;
}

std::shared_ptr<const UiModel> ModelRegistry::find(std::string_view id) const {
  const auto it = models_.find(id);
  return it == models_.end() ? nullptr : it->second;
}

std::vector<std::string> ModelRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, m] : models_) out.push_back(id);
  return out;
}

std::string fault_frame(std::string_view code, std::string_view message, bool fatal) {
  json f = frame("fault");
  f["code"] = code;
  f["message"] = message;
  f["fatal"] = fatal;
  return f.dump();
}

ServiceSession::ServiceSession(const ModelRegistry& models, bool debug, bool split_injections)
    : models_(models), debug_(debug), split_(split_injections) {}

std::vector<OutFrame> ServiceSession::handle(std::string_view message) {
  if (closed_) return {{fault_frame("closed", "session is closed", true), 0}};
  try {
    json msg;
    try {
      msg = json::parse(message);
    } catch (const json::parse_error& e) {
      throw Fault("bad_message", std::string("invalid JSON: ") + e.what());
    }
    if (!msg.is_object()) throw Fault("bad_message", "message must be a JSON object");
    if (!msg.contains("proto") || msg["proto"] != kProtocolVersion) {
      throw Fault("bad_proto", "expected proto " + std::to_string(kProtocolVersion));
    }
    if (!msg.contains("type") || !msg["type"].is_string()) throw Fault("bad_message", "missing type");
    const std::string type = msg["type"];
    if (type == "open") return on_open(msg);
    if (!run_) throw Fault("no_session", "'" + type + "' before open");
    if (type == "event") return on_event(msg);
    if (type == "debug") return on_debug();
    if (type == "close") return on_close();
    throw Fault("bad_message", "unknown message type '" + type + "'");
  } catch (const Fault& f) {
    if (f.fatal()) closed_ = true;
    return {{fault_frame(f.code(), f.what(), f.fatal()), 0}};
  } catch (const std::exception& e) {
    closed_ = true;
    return {{fault_frame("internal", e.what(), true), 0}};
  }
}

std::vector<OutFrame> ServiceSession::on_open(const json& msg) {
  if (run_) throw Fault("already_open", "session already open");
  if (!msg.contains("model") || !msg["model"].is_string()) throw Fault("bad_message", "open needs a model id");
  model_ = models_.find(msg["model"].get<std::string>());
  if (!model_) throw Fault("unknown_model", "unknown model '" + msg["model"].get<std::string>() + "'");
  if (!msg.contains("spec")) throw Fault("bad_spec", "open needs a spec");
  const AttackSpec spec = spec_from_json(msg["spec"]);
  const EstimatorConfig cfg = config_from_json(msg.value("config", json()));
  try {
    run_ = std::make_unique<AttackRun>(model_, spec, std::nullopt, cfg);
  } catch (const std::invalid_argument& e) {
    throw Fault("bad_spec", e.what());
  }
  id_ = "s" + std::to_string(++g_session_counter);
  json reply = frame("open");
  reply["session"] = id_;
  reply["model"] = msg["model"];
  reply["spec"] = format_attack_spec(run_->session().spec());
  reply["config"] = config_to_json(run_->session().estimator().config());
  reply["debug"] = debug_;
  return {{reply.dump(), 0}};
}

void ServiceSession::emit(std::vector<OutFrame>& out, const std::vector<InterposerDecision>& ds,
                          std::int64_t seq) {
  for (const InterposerDecision& d : ds) {
    const std::vector<InputEvent> evs = applied_events(d);
    const std::string line = format_decision(d);
    const bool split = split_ && std::holds_alternative<Inject>(d) && evs.size() > 1;
    auto pace = [&](const InputEvent& e) {
      const std::int64_t p = last_applied_t_ ? std::max<std::int64_t>(0, e.t_ms - *last_applied_t_) : 0;
      last_applied_t_ = e.t_ms;
      return p;
    };
    if (!split) {
      json f = frame("apply");
      f["seq"] = seq;
      f["decision"] = line;
      json events = json::array();
      for (const InputEvent& e : evs) events.push_back(format_event(e));
      f["events"] = std::move(events);
      std::int64_t p = 0;
      if (const auto* dl = std::get_if<Delay>(&d)) p = dl->ms;
      for (const InputEvent& e : evs) pace(e);
      out.push_back({f.dump(), p});
      continue;
    }
    for (std::size_t i = 0; i < evs.size(); ++i) {
      json f = frame("apply");
      f["seq"] = seq;
      if (i == 0) f["decision"] = line;
      f["part"] = i;
      f["parts"] = evs.size();
      f["events"] = json::array({format_event(evs[i])});
      const std::int64_t p = pace(evs[i]);
      out.push_back({f.dump(), i == 0 ? 0 : p});
    }
  }
}

std::vector<OutFrame> ServiceSession::on_event(const json& msg) {
  if (!msg.contains("seq") || !msg["seq"].is_number_integer()) throw Fault("bad_message", "event needs an integer seq");
  const std::int64_t seq = msg["seq"];
  if (seq != next_seq_) {
    throw Fault("out_of_order", "expected seq " + std::to_string(next_seq_) + ", got " + std::to_string(seq));
  }
  if (!msg.contains("event") || !msg["event"].is_string()) throw Fault("bad_message", "event needs an event line");
  InputEvent e;
  try {
    e = parse_event(msg["event"].get<std::string>(), static_cast<long>(seq));
  } catch (const TraceError& err) {
    throw Fault("bad_event", err.what());
  }
  if (last_t_ && e.t_ms < *last_t_) throw Fault("out_of_order", "timestamp went backwards");
  if (e.is_absolute()) throw Fault("bad_event", "the interposer takes relative mouse events");
  last_t_ = e.t_ms;
  ++next_seq_;
  std::vector<OutFrame> out;
  emit(out, run_->push(e), seq);
  return out;
}

std::vector<OutFrame> ServiceSession::on_debug() {
  if (!debug_) throw Fault("debug_disabled", "debug frames are disabled on this server", false);
  const Estimator& est = run_->session().estimator();
  const Estimate es = est.estimate();
  json f = frame("debug");
  json probs = json::object();
  for (StateIndex s = 0; s < es.state_probs.size(); ++s) probs[model_->states[s].id] = es.state_probs[s];
  f["state_probs"] = std::move(probs);
  f["top_state"] = model_->states[es.top_state].id;
  f["top_prob"] = es.top_prob;
  f["region"] = es.combined_region.serialize();
  f["trackers"] = es.tracker_count;
  f["snapshot"] = est.snapshot();
  return {{f.dump(), 0}};
}

std::vector<OutFrame> ServiceSession::on_close() {
  std::vector<OutFrame> out;
  emit(out, run_->finish(), next_seq_);
  const AttackOutcome o = run_->outcome();
  json f = frame("outcome");
  f["session"] = id_;
  f["launched"] = o.launched;
  f["success"] = o.success;
  f["visible_ms"] = o.visible_ms;
  f["injected_event_count"] = o.injected_event_count;
  f["restored"] = o.restored;
  f["net_zero"] = o.net_zero;
  f["decisions"] = o.decision_log.size();
  f["oracle_digest"] = hex64(state_digest(*model_, run_->terminal()));
  out.push_back({f.dump(), 0});
  closed_ = true;
  return out;
}

InterposerService::InterposerService(ModelRegistry models, ServiceOptions opts)
    : models_(std::move(models)), opts_(std::move(opts)), server_(opts_.host, opts_.port) {}

void InterposerService::run() {
  server_.run([this](ws::Connection& conn) { serve(conn); });
}

void InterposerService::serve(ws::Connection& conn) {
  ServiceSession session(models_, opts_.debug, opts_.pace);
  for (;;) {
    std::optional<std::string> msg;
    try {
      msg = conn.read_text();
    } catch (const ws::WsError& e) {
      if (conn.open()) {
        try {
          conn.send_text(fault_frame("bad_frame", e.what(), true));
        } catch (const ws::WsError&) {
        }
        conn.close(1002, "protocol error");
      }
      return;
    }
    if (!msg) return;
    for (const OutFrame& f : session.handle(*msg)) {
      if (opts_.pace && f.pace_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(f.pace_ms));
      conn.send_text(f.text);
    }
    if (session.closed()) {
      conn.close(1000, "session closed");
      return;
    }
  }
}

StreamResult stream_trace(const std::string& host, std::uint16_t port, const std::string& model_id,
                          const AttackSpec& spec, const Trace& trace, const EstimatorConfig& cfg) {
  auto conn = ws::connect(host, port);
  StreamResult r;
  auto expect = [&]() {
    auto text = conn->read_text();
    if (!text) throw std::runtime_error("service closed the connection");
    json f = json::parse(*text);
    if (f.value("type", "") == "fault") {
      throw std::runtime_error("service fault " + f.value("code", "") + ": " + f.value("message", ""));
    }
    return f;
  };
  auto collect = [&](const json& f) {
    if (f.contains("decision")) r.decision_log.push_back(f["decision"].get<std::string>());
    for (const auto& e : f["events"]) r.applied.push_back(parse_event(e.get<std::string>()));
  };
  json spec_json{{"variant", to_string(spec.variant)},
                 {"target_element", spec.target_element},
                 {"malicious_value", value_to_json(spec.malicious_value)},
                 {"step_interval_ms", spec.step_interval_ms},
                 {"element_wait_ms", spec.element_wait_ms}};
  if (!spec.target_state.empty()) spec_json["target_state"] = spec.target_state;
  json open = frame("open");
  open["model"] = model_id;
  open["spec"] = std::move(spec_json);
  open["config"] = config_to_json(cfg);
  conn->send_text(open.dump());
  if (expect().value("type", "") != "open") throw std::runtime_error("expected an open reply");

  // Events are pipelined; a reader thread drains the replies meanwhile.
  std::exception_ptr failure;
  std::exception_ptr send_failure;
  std::thread reader([&] {
    try {
      for (;;) {
        json f = expect();
        const std::string type = f.value("type", "");
        if (type == "apply") {
          collect(f);
          continue;
        }
        if (type != "outcome") throw std::runtime_error("unexpected frame '" + type + "'");
        r.outcome.launched = f["launched"];
        r.outcome.success = f["success"];
        r.outcome.visible_ms = f["visible_ms"];
        r.outcome.injected_event_count = f["injected_event_count"];
        r.outcome.restored = f["restored"];
        r.outcome.net_zero = f["net_zero"];
        r.outcome.decision_log = r.decision_log;
        r.oracle_digest = f["oracle_digest"];
        r.outcome_frame = f.dump();
        return;
      }
    } catch (...) {
      failure = std::current_exception();
    }
  });
  try {
    std::int64_t seq = 0;
    for (const InputEvent& e : trace.events) {
      json ev = frame("event");
      ev["seq"] = seq++;
      ev["event"] = format_event(e);
      conn->send_text(ev.dump());
    }
    conn->send_text(frame("close").dump());
  } catch (...) {
    // A fault closes the connection mid-stream; the reader reports it.
    send_failure = std::current_exception();
  }
  reader.join();
  if (failure) std::rethrow_exception(failure);
  if (send_failure) std::rethrow_exception(send_failure);
  conn->close();
  return r;
}

}  // namespace blindtrack
