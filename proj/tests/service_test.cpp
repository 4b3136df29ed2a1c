#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "blindtrack/service.hpp"
#include "blindtrack/ws.hpp"
#include "support.hpp"

namespace blindtrack {
namespace {

using nlohmann::json;

ModelRegistry registry() {
  ModelRegistry r;
  r.add(test::pacemaker());
  return r;
}

json one(const std::vector<OutFrame>& frames) {
  EXPECT_EQ(frames.size(), 1u);
  return frames.empty() ? json() : json::parse(frames.front().text);
}

std::string open_msg(const std::string& spec = "confirmation:rate=180@10") {
  return json{{"proto", 1}, {"type", "open"}, {"model", "pacemaker"}, {"spec", spec}}.dump();
}

std::string event_msg(std::int64_t seq, const std::string& line) {
  return json{{"proto", 1}, {"type", "event"}, {"seq", seq}, {"event", line}}.dump();
}

TEST(WebSocket, HandshakeKeyFromTheRfc) {
  EXPECT_EQ(ws::accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
  EXPECT_EQ(ws::base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(ws::base64_encode("fo"), "Zm8=");
}

TEST(WebSocket, FrameEncoding) {
  // Unmasked "Hello" and the masked example from RFC 6455 section 5.7.
  EXPECT_EQ(ws::encode_frame(ws::Opcode::kText, "Hello"), std::string("\x81\x05Hello", 7));
  EXPECT_EQ(ws::encode_frame(ws::Opcode::kText, "Hello", 0x37fa213d),
            std::string("\x81\x85\x37\xfa\x21\x3d\x7f\x9f\x4d\x51\x58", 11));
  const std::string big(300, 'x');
  const std::string f = ws::encode_frame(ws::Opcode::kText, big);
  EXPECT_EQ(f.substr(0, 4), std::string("\x81\x7e\x01\x2c", 4));
  EXPECT_EQ(f.size(), 304u);
}

TEST(Session, EventBeforeOpen) {
  const ModelRegistry r = registry();
  ServiceSession s(r, false);
  const json f = one(s.handle(event_msg(0, "10 move 1 1")));
  EXPECT_EQ(f["type"], "fault");
  EXPECT_EQ(f["code"], "no_session");
}

TEST(Session, ProtocolErrors) {
  const ModelRegistry r = registry();
  {
    ServiceSession s(r, false);
    EXPECT_EQ(one(s.handle("not json"))["code"], "bad_message");
  }
  {
    ServiceSession s(r, false);
    EXPECT_EQ(one(s.handle(R"({"proto": 2, "type": "open"})"))["code"], "bad_proto");
  }
  {
    ServiceSession s(r, false);
    EXPECT_EQ(one(s.handle(json{{"proto", 1}, {"type", "open"}, {"model", "toaster"}, {"spec", "x"}}.dump()))["code"],
              "unknown_model");
  }
  {
    ServiceSession s(r, false);
    EXPECT_EQ(one(s.handle(open_msg("element:home=1@10")))["code"], "bad_spec");
  }
  {
    ServiceSession s(r, false);
    const json bad_cfg{{"proto", 1}, {"type", "open"}, {"model", "pacemaker"},
                       {"spec", "confirmation:rate=180@10"}, {"config", {{"scheme", "psychic"}}}};
    EXPECT_EQ(one(s.handle(bad_cfg.dump()))["code"], "bad_config");
  }
}

TEST(Session, OpenEventsAndOrdering) {
  const ModelRegistry r = registry();
  ServiceSession s(r, false);
  const json open = one(s.handle(open_msg()));
  EXPECT_EQ(open["type"], "open");
  EXPECT_EQ(open["spec"], "confirmation:rate=180@10,state=program");
  EXPECT_EQ(open["debug"], false);

  const json apply = one(s.handle(event_msg(0, "10 move 3 4")));
  EXPECT_EQ(apply["type"], "apply");
  EXPECT_EQ(apply["decision"], "pass 10 move 3 4");
  EXPECT_EQ(apply["events"], json::array({"10 move 3 4"}));

  const json dbg = one(s.handle(R"({"proto": 1, "type": "debug"})"));
  EXPECT_EQ(dbg["code"], "debug_disabled");
  EXPECT_EQ(dbg["fatal"], false);
  EXPECT_FALSE(s.closed());

  EXPECT_EQ(one(s.handle(event_msg(0, "20 move 1 1")))["code"], "out_of_order");
  EXPECT_TRUE(s.closed());
  EXPECT_EQ(one(s.handle(event_msg(1, "20 move 1 1")))["code"], "closed");
}

TEST(Session, SecondOpenIsFatal) {
  const ModelRegistry r = registry();
  ServiceSession s(r, false);
  s.handle(open_msg());
  const json f = one(s.handle(open_msg()));
  EXPECT_EQ(f["code"], "already_open");
  EXPECT_EQ(f["fatal"], true);
  EXPECT_TRUE(s.closed());
}

TEST(Session, BadEventIsFatal) {
  const ModelRegistry r = registry();
  ServiceSession s(r, false);
  s.handle(open_msg());
  EXPECT_EQ(one(s.handle(event_msg(0, "10 touch_down 3 3")))["code"], "bad_event");
  EXPECT_TRUE(s.closed());
}

TEST(Session, DebugFrames) {
  const ModelRegistry r = registry();
  ServiceSession s(r, true);
  s.handle(open_msg());
  s.handle(event_msg(0, "10 move -700 -500"));
  const json dbg = one(s.handle(R"({"proto": 1, "type": "debug"})"));
  EXPECT_EQ(dbg["type"], "debug");
  EXPECT_EQ(dbg["region"], "0,0,1,1");
  EXPECT_EQ(dbg["top_state"], "home");
  EXPECT_DOUBLE_EQ(dbg["top_prob"].get<double>(), 1.0);
  EXPECT_EQ(dbg["trackers"], 1);
}

TEST(Session, CloseReportsOutcome) {
  const ModelRegistry r = registry();
  const Trace tr = load_trace_file(test::source_path("models/demo.trace"));
  const AttackSpec spec = parse_attack_spec("confirmation:rate=180@10");
  ServiceSession s(r, false);
  s.handle(open_msg());
  std::vector<std::string> log;
  for (std::size_t i = 0; i < tr.events.size(); ++i)
    for (const OutFrame& f : s.handle(event_msg(static_cast<std::int64_t>(i), format_event(tr.events[i]))))
      log.push_back(json::parse(f.text)["decision"]);
  json outcome;
  for (const OutFrame& f : s.handle(R"({"proto": 1, "type": "close"})")) {
    const json j = json::parse(f.text);
    if (j["type"] == "outcome") outcome = j;
    else log.push_back(j["decision"]);
  }
  const AttackOutcome want = run_attack(test::pacemaker(), tr, spec);
  EXPECT_EQ(log, want.decision_log);
  EXPECT_EQ(outcome["launched"], want.launched);
  EXPECT_EQ(outcome["success"], want.success);
  EXPECT_EQ(outcome["visible_ms"], want.visible_ms);
  EXPECT_EQ(outcome["decisions"], want.decision_log.size());
  EXPECT_TRUE(s.closed());
}

TEST(Session, SplitInjectionsCarryParts) {
  const ModelRegistry r = registry();
  ServiceSession s(r, false, true);
  s.handle(open_msg());
  const Trace tr = load_trace_file(test::source_path("models/demo.trace"));
  bool saw_parts = false;
  for (std::size_t i = 0; i < tr.events.size(); ++i) {
    for (const OutFrame& f : s.handle(event_msg(static_cast<std::int64_t>(i), format_event(tr.events[i])))) {
      const json j = json::parse(f.text);
      if (!j.contains("parts")) continue;
      saw_parts = true;
      EXPECT_EQ(j["events"].size(), 1u);
      EXPECT_EQ(j.contains("decision"), j["part"] == 0);
    }
  }
  EXPECT_TRUE(saw_parts);
}

// Streaming over a real socket gives the library's decision log.
TEST(Service, EquivalentToLibraryPath) {
  InterposerService service(registry(), ServiceOptions{"127.0.0.1", 0, false, false});
  std::thread server([&] { service.run(); });
  const auto m = test::pacemaker();
  for (const char* text : {"confirmation:rate=180@10", "element:threshold=200@125"}) {
    const AttackSpec spec = parse_attack_spec(text);
    for (const CorpusTrace& c : test::corpus(4, 4000)) {
      const StreamResult got = stream_trace("127.0.0.1", service.port(), "pacemaker", spec, c.trace);
      const AttackOutcome want = run_attack(m, c.trace, spec);
      EXPECT_EQ(got.decision_log, want.decision_log) << text << " " << c.id;
      EXPECT_EQ(got.outcome.success, want.success);
      EXPECT_EQ(got.outcome.visible_ms, want.visible_ms);
    }
  }
  service.stop();
  server.join();
}

TEST(Service, RawClientGetsFaultFrames) {
  InterposerService service(registry(), ServiceOptions{"127.0.0.1", 0, false, false});
  std::thread server([&] { service.run(); });
  EXPECT_THROW(ws::connect("127.0.0.1", 1, "/"), std::exception);
  auto conn = ws::connect("127.0.0.1", service.port(), "/");
  conn->send_text(R"({"proto": 1, "type": "debug"})");
  const auto reply = conn->read_text();
  ASSERT_TRUE(reply.has_value());
  EXPECT_EQ(json::parse(*reply)["code"], "no_session");
  conn->close();
  service.stop();
  server.join();
}

}  // namespace
}  // namespace blindtrack
