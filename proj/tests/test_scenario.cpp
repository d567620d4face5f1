#include <gtest/gtest.h>

#include "sipov/errors.hpp"
#include "sipov/scenario.hpp"

using namespace sipov;

namespace {
const char* kMinimal =
    "topology.proxies = 2\n"
    "run.duration = 60\n"
    "run.seed = 7\n";

std::string key_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}
}  // namespace

TEST(Scenario, MinimalDocumentGetsDefaults) {
  const auto c = parse_scenario(kMinimal);
  EXPECT_EQ(c.proxies, 2);
  EXPECT_EQ(c.t1, 0.5);
  EXPECT_EQ(c.t2, 4.0);
  EXPECT_EQ(c.loss, 0.08);
  EXPECT_EQ(c.duration, 60.0);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.controller.name, ControllerName::None);
  EXPECT_EQ(c.controller.p_min, 0.2);
  EXPECT_EQ(c.reject_cost, 0.5);
}

TEST(Scenario, CommentsAndBlankLines) {
  const auto c = parse_scenario(std::string("# tandem\n\n") + kMinimal + "  link.loss = 0   # lossless\n");
  EXPECT_EQ(c.loss, 0.0);
}

TEST(Scenario, InvalidPminNamesKey) {
  EXPECT_EQ(key_of(std::string(kMinimal) + "controller = rtqc\ncontroller.p_min = 1.5\n"),
            "controller.p_min");
}

TEST(Scenario, DuplicateKey) {
  EXPECT_EQ(key_of(std::string(kMinimal) + "link.loss = 0.1\nlink.loss = 0.2\n"), "link.loss");
  EXPECT_EQ(key_of(std::string(kMinimal) + "controller = rtqc\ncontroller.name = none\n"),
            "controller.name");
}

TEST(Scenario, UnknownKey) {
  EXPECT_EQ(key_of(std::string(kMinimal) + "link.los = 0.1\n"), "link.los");
}

TEST(Scenario, MissingRequired) {
  EXPECT_EQ(key_of("topology.proxies = 1\nrun.seed = 1\n"), "run.duration");
  EXPECT_EQ(key_of("topology.proxies = 1\nrun.duration = 5\n"), "run.seed");
}

TEST(Scenario, TypeMismatch) {
  EXPECT_EQ(key_of(std::string(kMinimal) + "server.mu = fast\n"), "server.mu");
  EXPECT_EQ(key_of(std::string(kMinimal) + "topology.uacs = 1.5\n"), "topology.uacs");
}

TEST(Scenario, Constraints) {
  EXPECT_EQ(key_of("topology.proxies = 3\nrun.duration = 5\nrun.seed = 1\n"), "topology.proxies");
  EXPECT_EQ(key_of(std::string(kMinimal) + "timers.t2 = 0.1\n"), "timers.t2");
  EXPECT_EQ(key_of(std::string(kMinimal) + "controller = priority\ncontroller.th_high = 50\n"),
            "controller.th_high");
  EXPECT_EQ(key_of(std::string(kMinimal) + "fluid.enabled = true\nfluid.dt = 0.2\n"), "fluid.dt");
  EXPECT_EQ(key_of(std::string(kMinimal) + "topology.cluster = 3\n"), "balancer.name");
}

TEST(Scenario, RoundTrip) {
  std::string doc = std::string(kMinimal) +
                    "topology.uacs = 3\n"
                    "server.mu = 1234.5678\n"
                    "server.buffer = 300\n"
                    "server.p2.mu = 0.1\n"
                    "server.p1.buffer = unlimited\n"
                    "workload.segments = 0:10:3.3333333333333335, 10:60:250\n"
                    "workload.slowdown = p2:30:90:0.5\n"
                    "controller = rrrc\n"
                    "controller.setpoint = 0.15\n"
                    "controller.denominator = messages\n"
                    "fluid.enabled = true\n"
                    "fluid.dt = 0.001\n";
  const auto c = parse_scenario(doc);
  EXPECT_EQ(parse_scenario(emit_scenario(c)), c);
  EXPECT_EQ(emit_scenario(parse_scenario(emit_scenario(c))), emit_scenario(c));
}

TEST(Scenario, RoundTripCluster) {
  const auto c = parse_scenario(std::string(kMinimal) +
                                "topology.cluster = 3\nbalancer.name = tlwl\nbalancer.invite_cost = 3\n");
  EXPECT_EQ(parse_scenario(emit_scenario(c)), c);
  EXPECT_EQ(c.server_names(), (std::vector<std::string>{"p1", "p2", "c1", "c2", "c3"}));
}

TEST(Scenario, ControllerHost) {
  auto c = parse_scenario(kMinimal);
  EXPECT_EQ(c.controller_host(), "p2");
  c.controller.name = ControllerName::Window;
  EXPECT_EQ(c.controller_host(), "p1");
  c.controller.server = "p2";
  EXPECT_EQ(c.controller_host(), "p2");
}
