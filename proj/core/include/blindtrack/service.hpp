#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blindtrack/attack.hpp"
#include "blindtrack/estimator.hpp"
#include "blindtrack/trace.hpp"
#include "blindtrack/ui_model.hpp"
#include "blindtrack/ws.hpp"

#include <nlohmann/json_fwd.hpp>

namespace blindtrack {

inline constexpr int kProtocolVersion = 1;

/// Models served by id (the model's name, and the file stem when loaded
/// from a directory).
class ModelRegistry {
 public:
  void add(std::shared_ptr<const UiModel> model, std::string id = {});
  /// Loads every *.model file in `dir`; returns how many were loaded.
  std::size_t load_dir(const std::string& dir);
  std::shared_ptr<const UiModel> find(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<const UiModel>, std::less<>> models_;
};

/// A frame to send, and how long to wait before sending it when pacing in
/// real time.
struct OutFrame {
  std::string text;
  std::int64_t pace_ms = 0;
};

/// Protocol state machine for one connection, independent of transport.
/// See docs/protocol.md.
class ServiceSession {
 public:
  ServiceSession(const ModelRegistry& models, bool debug, bool split_injections = false);

  std::vector<OutFrame> handle(std::string_view message);
  bool closed() const { return closed_; }
  const std::string& id() const { return id_; }

 private:
  std::vector<OutFrame> on_open(const nlohmann::json& msg);
  std::vector<OutFrame> on_event(const nlohmann::json& msg);
  std::vector<OutFrame> on_debug();
  std::vector<OutFrame> on_close();
  void emit(std::vector<OutFrame>& out, const std::vector<InterposerDecision>& ds,
            std::int64_t seq);

  const ModelRegistry& models_;
  bool debug_;
  bool split_;
  bool closed_ = false;
  std::string id_;
  std::shared_ptr<const UiModel> model_;
  std::unique_ptr<AttackRun> run_;
  std::int64_t next_seq_ = 0;
  std::optional<std::int64_t> last_t_;
  std::optional<std::int64_t> last_applied_t_;
};

/// Builds the error frame {"type":"fault"}.
std::string fault_frame(std::string_view code, std::string_view message, bool fatal);

struct ServiceOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;
  bool debug = false;
  /// Emit injected events one frame at a time, spaced by their timestamps.
  bool pace = false;
};

class InterposerService {
 public:
  InterposerService(ModelRegistry models, ServiceOptions opts);

  std::uint16_t port() const { return server_.port(); }
  /// Serves until stop(); sessions run concurrently.
  void run();
  void stop() { server_.stop(); }

 private:
  void serve(ws::Connection& conn);

  ModelRegistry models_;
  ServiceOptions opts_;
  ws::Server server_;
};

/// What a client saw when streaming one trace through the service.
struct StreamResult {
  std::vector<std::string> decision_log;
  std::vector<InputEvent> applied;
  AttackOutcome outcome;
  std::string oracle_digest;
  std::string outcome_frame;
};

/// Opens a session, streams `trace`, closes and collects the outcome.
/// Throws std::runtime_error on a fault frame.
StreamResult stream_trace(const std::string& host, std::uint16_t port,
                          const std::string& model_id, const AttackSpec& spec,
                          const Trace& trace, const EstimatorConfig& cfg = {});

}  // namespace blindtrack
