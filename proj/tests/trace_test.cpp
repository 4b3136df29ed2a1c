#include <gtest/gtest.h>

#include "blindtrack/trace.hpp"

namespace blindtrack {
namespace {

long error_index(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const TraceError& e) {
    return e.index();
  }
  return -2;
}

const char* kHeader = "@format blindtrack-trace/1\n@model pacemaker\n@mode relative_mouse\n";

TEST(Trace, RoundTrip) {
  Trace t;
  t.meta.model = "pacemaker";
  t.meta.seed = 12;
  t.meta.task = "demo";
  t.events = {{0, MouseMove{{-3, 7}}}, {15, ButtonDown{}}, {15, ButtonUp{}}};
  const Trace back = parse_trace(serialize_trace(t));
  EXPECT_EQ(back, t);
  EXPECT_EQ(serialize_trace(back), serialize_trace(t));
}

TEST(Trace, EventLines) {
  EXPECT_EQ(format_event({5, MouseMove{{1, -2}}}), "5 move 1 -2");
  EXPECT_EQ(format_event({6, Key{"<C-a>"}}), "6 key <C-a>");
  EXPECT_EQ(format_event({7, TouchUp{{3, 4}}}), "7 touch_up 3 4");
  EXPECT_EQ(parse_event("9 key 7").payload, EventPayload(Key{"7"}));
  EXPECT_EQ(parse_event("0 boot").payload, EventPayload(Boot{}));
  EXPECT_THROW(parse_event("1 key <Nope>"), TraceError);
  EXPECT_THROW(parse_event("1 wiggle"), TraceError);
  EXPECT_THROW(parse_event("1 down 3"), TraceError);
}

TEST(Trace, DecreasingTimestampNamesIndex) {
  EXPECT_EQ(error_index(std::string(kHeader) + "10 move 1 1\n20 down\n15 up\n"), 2);
}

TEST(Trace, MixedModesRejected) {
  EXPECT_EQ(error_index(std::string(kHeader) + "10 move 1 1\n20 touch_down 3 3\n"), 1);
  EXPECT_EQ(error_index("@format blindtrack-trace/1\n@mode absolute_touch\n1 touch_down 1 1\n2 move 1 0\n"),
            1);
}

TEST(Trace, FractionalDeltaRejected) {
  EXPECT_EQ(error_index(std::string(kHeader) + "1 down\n2 move 1.5 0\n"), 1);
}

TEST(Trace, HeaderErrors) {
  EXPECT_EQ(error_index("@format blindtrack-trace/9\n"), -1);
  EXPECT_EQ(error_index(std::string(kHeader) + "@colour blue\n"), -1);
  EXPECT_EQ(error_index(std::string(kHeader) + "1 down\n@seed 3\n"), -1);
}

TEST(Trace, CountReleases) {
  const Trace t = parse_trace(std::string(kHeader) + "1 down\n2 up\n3 down\n4 move 1 0\n5 up\n6 key a\n");
  EXPECT_EQ(count_releases(t), 2u);
  EXPECT_EQ(t.events.size(), 6u);
  EXPECT_TRUE(t.events[0].is_relative());
  EXPECT_FALSE(t.events[5].is_absolute());
}

}  // namespace
}  // namespace blindtrack
