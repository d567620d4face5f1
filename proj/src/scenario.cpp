#include "sipov/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "sipov/errors.hpp"

namespace sipov {

namespace {

constexpr std::pair<ControllerName, std::string_view> kControllerNames[] = {
    {ControllerName::None, "none"},
    {ControllerName::BangBang, "bangbang"},
    {ControllerName::Occupancy, "occupancy"},
    {ControllerName::Priority, "priority"},
    {ControllerName::Window, "window"},
    {ControllerName::RetryAfter, "retry_after"},
    {ControllerName::RateOccupancy, "rate_occupancy"},
    {ControllerName::RateDelay, "rate_delay"},
    {ControllerName::Rtqc, "rtqc"},
    {ControllerName::Rrrc, "rrrc"},
    {ControllerName::Rtdc, "rtdc"},
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, std::string_view v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + std::string(v) + "'");
}

std::size_t to_buffer(const std::string& key, std::string_view v) {
  if (v == "unlimited" || v == "inf") return ServerQueue::kUnlimited;
  const auto n = to_uint(key, v);
  if (n == 0) throw ConfigError(key, "buffer must be positive or 'unlimited'");
  return static_cast<std::size_t>(n);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string buffer_str(std::size_t b) {
  return b == ServerQueue::kUnlimited ? "unlimited" : std::to_string(b);
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto dbl = [](double ScenarioConfig::*f) {
      return [f](ScenarioConfig& c, const std::string& k, std::string_view v) { c.*f = to_double(k, v); };
    };
    auto cdbl = [](double ControllerConfig::*f) {
      return [f](ScenarioConfig& c, const std::string& k, std::string_view v) {
        c.controller.*f = to_double(k, v);
      };
    };
    auto boolean = [](bool ScenarioConfig::*f) {
      return [f](ScenarioConfig& c, const std::string& k, std::string_view v) { c.*f = to_bool(k, v); };
    };
    auto integer = [](int ScenarioConfig::*f) {
      return [f](ScenarioConfig& c, const std::string& k, std::string_view v) {
        c.*f = static_cast<int>(to_int(k, v));
      };
    };

    t["topology.uacs"] = integer(&ScenarioConfig::uacs);
    t["topology.proxies"] = integer(&ScenarioConfig::proxies);
    t["topology.cluster"] = integer(&ScenarioConfig::cluster);
    t["topology.alternate"] = boolean(&ScenarioConfig::alternate);

    t["server.mu"] = dbl(&ScenarioConfig::mu);
    t["server.buffer"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.buffer = to_buffer(k, v);
    };
    t["server.service"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      if (v == "exponential") c.service = ServiceDistribution::Exponential;
      else if (v == "deterministic") c.service = ServiceDistribution::Deterministic;
      else throw ConfigError(k, "expected exponential or deterministic");
    };
    t["server.reject_cost"] = dbl(&ScenarioConfig::reject_cost);
    t["server.reroute"] = boolean(&ScenarioConfig::reroute);

    t["timers.t1"] = dbl(&ScenarioConfig::t1);
    t["timers.t2"] = dbl(&ScenarioConfig::t2);
    t["link.loss"] = dbl(&ScenarioConfig::loss);
    t["link.delay"] = dbl(&ScenarioConfig::link_delay);

    t["workload.segments"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.workload.segments.clear();
      if (trim(v).empty()) return;
      for (auto item : split(v, ',')) {
        auto parts = split(item, ':');
        if (parts.size() != 3) throw ConfigError(k, "segment must be start:end:rate");
        c.workload.segments.push_back(
            {to_double(k, parts[0]), to_double(k, parts[1]), to_double(k, parts[2])});
      }
    };
    t["workload.process"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      if (v == "poisson") c.workload.process = ArrivalProcess::Poisson;
      else if (v == "deterministic") c.workload.process = ArrivalProcess::Deterministic;
      else throw ConfigError(k, "expected poisson or deterministic");
    };
    t["workload.slowdown"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.workload.slowdowns.clear();
      if (trim(v).empty()) return;
      for (auto item : split(v, ',')) {
        auto parts = split(item, ':');
        if (parts.size() != 4) throw ConfigError(k, "slowdown must be server:start:end:multiplier");
        c.workload.slowdowns.push_back(
            {std::string(parts[0]),
             {to_double(k, parts[1]), to_double(k, parts[2]), to_double(k, parts[3])}});
      }
    };
    t["workload.hold"] = dbl(&ScenarioConfig::hold);
    t["workload.teardown"] = boolean(&ScenarioConfig::teardown);

    auto set_name = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      auto n = controller_from_string(v);
      if (!n) throw ConfigError(k, "unknown controller '" + std::string(v) + "'");
      c.controller.name = *n;
    };
    t["controller"] = set_name;
    t["controller.name"] = set_name;
    t["controller.server"] = [](ScenarioConfig& c, const std::string&, std::string_view v) {
      c.controller.server = std::string(v);
    };
    t["controller.tick"] = cdbl(&ControllerConfig::tick);
    t["controller.high"] = cdbl(&ControllerConfig::high);
    t["controller.low"] = cdbl(&ControllerConfig::low);
    t["controller.q_target"] = cdbl(&ControllerConfig::q_target);
    t["controller.rho_target"] = cdbl(&ControllerConfig::rho_target);
    t["controller.gain"] = cdbl(&ControllerConfig::gain);
    t["controller.meter_window"] = cdbl(&ControllerConfig::meter_window);
    t["controller.thresholds"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.controller.thresholds = to_bool(k, v);
    };
    t["controller.th_low"] = cdbl(&ControllerConfig::th_low);
    t["controller.th_high"] = cdbl(&ControllerConfig::th_high);
    t["controller.window"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.controller.window = static_cast<int>(to_int(k, v));
    };
    t["controller.d_target"] = cdbl(&ControllerConfig::d_target);
    t["controller.p_min"] = cdbl(&ControllerConfig::p_min);
    t["controller.horizon"] = cdbl(&ControllerConfig::horizon);
    t["controller.tuning_gain"] = cdbl(&ControllerConfig::tuning_gain);
    t["controller.setpoint"] = cdbl(&ControllerConfig::setpoint);
    t["controller.kp"] = cdbl(&ControllerConfig::kp);
    t["controller.ki"] = cdbl(&ControllerConfig::ki);
    t["controller.alpha"] = cdbl(&ControllerConfig::alpha);
    t["controller.ratio_window"] = cdbl(&ControllerConfig::ratio_window);
    t["controller.denominator"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      if (v == "retransmissions") c.controller.denominator = RatioDenominator::Retransmissions;
      else if (v == "messages") c.controller.denominator = RatioDenominator::Messages;
      else throw ConfigError(k, "expected retransmissions or messages");
    };

    t["balancer.name"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      if (v == "none") c.balancer.reset();
      else if (v == "cjsq") c.balancer = BalancerAlgorithm::Cjsq;
      else if (v == "tjsq") c.balancer = BalancerAlgorithm::Tjsq;
      else if (v == "tlwl") c.balancer = BalancerAlgorithm::Tlwl;
      else throw ConfigError(k, "expected none, cjsq, tjsq or tlwl");
    };
    t["balancer.invite_cost"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.costs.invite_transaction = to_double(k, v);
    };
    t["balancer.bye_cost"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.costs.bye_transaction = to_double(k, v);
    };

    t["fluid.enabled"] = boolean(&ScenarioConfig::fluid);
    t["fluid.dt"] = dbl(&ScenarioConfig::fluid_dt);
    t["fluid.redundant_responses"] = boolean(&ScenarioConfig::fluid_redundant_responses);

    t["run.duration"] = dbl(&ScenarioConfig::duration);
    t["run.seed"] = [](ScenarioConfig& c, const std::string& k, std::string_view v) {
      c.seed = to_uint(k, v);
    };
    t["run.sample"] = dbl(&ScenarioConfig::sample);
    t["run.drain"] = boolean(&ScenarioConfig::drain);
    t["run.out"] = [](ScenarioConfig& c, const std::string&, std::string_view v) {
      c.out = std::string(v);
    };
    return t;
  }();
  return table;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

std::string_view to_string(ControllerName n) {
  for (const auto& [name, s] : kControllerNames) {
    if (name == n) return s;
  }
  return "?";
}

std::optional<ControllerName> controller_from_string(std::string_view s) {
  for (const auto& [name, str] : kControllerNames) {
    if (str == s) return name;
  }
  if (s == "bang-bang") return ControllerName::BangBang;
  return std::nullopt;
}

std::vector<std::string> ScenarioConfig::server_names() const {
  std::vector<std::string> names;
  for (int i = 1; i <= proxies; ++i) names.push_back("p" + std::to_string(i));
  if (alternate) names.push_back("alt");
  for (int i = 1; i <= cluster; ++i) names.push_back("c" + std::to_string(i));
  return names;
}

double ScenarioConfig::mu_of(const std::string& server) const {
  auto it = overrides.find(server);
  return it != overrides.end() && it->second.mu ? *it->second.mu : mu;
}

std::size_t ScenarioConfig::buffer_of(const std::string& server) const {
  auto it = overrides.find(server);
  return it != overrides.end() && it->second.buffer ? *it->second.buffer : buffer;
}

std::string ScenarioConfig::controller_host() const {
  if (!controller.server.empty()) return controller.server;
  if (controller.name == ControllerName::Window) return "p1";
  return "p" + std::to_string(proxies);
}

void validate(const ScenarioConfig& c) {
  require(c.uacs >= 1, "topology.uacs", "need at least one UAC");
  require(c.proxies >= 1 && c.proxies <= 2, "topology.proxies", "proxy chain length must be 1 or 2");
  require(c.cluster >= 0, "topology.cluster", "cluster size must be >= 0");
  require(!(c.alternate && c.cluster > 0), "topology.alternate",
          "an alternate route cannot be combined with a cluster");
  require(c.cluster == 0 || c.balancer.has_value(), "balancer.name",
          "a cluster needs a balancer algorithm");
  require(c.mu > 0.0, "server.mu", "service rate must be positive");
  require(c.reject_cost >= 0.0 && c.reject_cost <= 1.0, "server.reject_cost", "must lie in [0, 1]");

  const auto names = c.server_names();
  for (const auto& [name, ov] : c.overrides) {
    require(std::find(names.begin(), names.end(), name) != names.end(), "server." + name,
            "unknown server '" + name + "'");
    if (ov.mu) require(*ov.mu > 0.0, "server." + name + ".mu", "service rate must be positive");
  }

  require(c.t1 > 0.0, "timers.t1", "T1 must be positive");
  require(c.t2 >= c.t1, "timers.t2", "T2 must be >= T1");
  require(c.loss >= 0.0 && c.loss <= 1.0, "link.loss", "loss probability must lie in [0, 1]");
  require(c.link_delay >= 0.0, "link.delay", "propagation delay must be >= 0");

  try {
    validate(c.workload);
  } catch (const ParameterError& e) {
    const bool slow = std::string(e.what()).find("slowdown") != std::string::npos;
    throw ConfigError(slow ? "workload.slowdown" : "workload.segments", e.what());
  }
  for (const auto& sd : c.workload.slowdowns) {
    require(std::find(names.begin(), names.end(), sd.server) != names.end(), "workload.slowdown",
            "unknown server '" + sd.server + "'");
  }
  require(c.hold >= 0.0, "workload.hold", "hold time must be >= 0");

  const auto& k = c.controller;
  if (k.name != ControllerName::None && !is_retransmission_control(k.name)) {
    const auto host = c.controller_host();
    require(std::find(names.begin(), names.end(), host) != names.end(), "controller.server",
            "unknown server '" + host + "'");
  }
  require(k.tick >= 0.0, "controller.tick", "tick must be >= 0");
  require(k.high > 0.0, "controller.high", "threshold must be positive");
  require(k.low >= 0.0 && k.low < k.high, "controller.low", "need 0 <= low < high");
  require(k.q_target >= 0.0, "controller.q_target", "must be >= 0");
  require(k.rho_target > 0.0 && k.rho_target <= 1.0, "controller.rho_target", "must lie in (0, 1]");
  require(k.gain > 0.0, "controller.gain", "gain must be positive");
  require(k.meter_window > 0.0, "controller.meter_window", "window must be positive");
  require(k.th_low >= 0.0, "controller.th_low", "must be >= 0");
  require(k.th_high > k.th_low, "controller.th_high", "need th_low < th_high");
  require(k.window >= 0, "controller.window", "window must be >= 0");
  require(k.d_target >= 0.0, "controller.d_target", "target delay must be >= 0");
  require(k.p_min > 0.0 && k.p_min <= 1.0, "controller.p_min", "p_min must lie in (0, 1]");
  require(k.horizon >= 0.0, "controller.horizon", "horizon must be >= 0");
  require(k.tuning_gain > 0.0 && k.tuning_gain <= 1.0, "controller.tuning_gain",
          "must lie in (0, 1]");
  require(k.setpoint >= 0.0 && k.setpoint <= 1.0, "controller.setpoint", "must lie in [0, 1]");
  require(k.kp >= 0.0, "controller.kp", "gain must be >= 0");
  require(k.ki >= 0.0, "controller.ki", "gain must be >= 0");
  require(k.alpha > 0.0 && k.alpha <= 1.0, "controller.alpha", "must lie in (0, 1]");
  require(k.ratio_window > 0.0, "controller.ratio_window", "window must be positive");

  require(c.costs.invite_transaction >= 0.0, "balancer.invite_cost", "cost must be >= 0");
  require(c.costs.bye_transaction >= 0.0, "balancer.bye_cost", "cost must be >= 0");

  require(c.fluid_dt > 0.0 && c.fluid_dt <= c.t1 / 10.0, "fluid.dt", "need 0 < dt <= T1/10");
  require(!c.fluid || c.proxies == 2, "fluid.enabled", "the fluid model covers a 2-proxy tandem");
  require(c.duration > 0.0, "run.duration", "duration must be positive");
  require(c.sample > 0.0, "run.sample", "sample tick must be positive");
}

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  std::set<std::string> seen;
  bool have_segments = false;

  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));

    std::string canonical = key == "controller" ? "controller.name" : key;
    if (!seen.insert(canonical).second) throw ConfigError(key, "duplicated key");

    // server.<id>.mu / server.<id>.buffer
    if (key.rfind("server.", 0) == 0 && std::count(key.begin(), key.end(), '.') == 2) {
      const auto dot = key.find('.', 7);
      const std::string id = key.substr(7, dot - 7);
      const std::string field = key.substr(dot + 1);
      if (field == "mu") {
        cfg.overrides[id].mu = to_double(key, value);
      } else if (field == "buffer") {
        cfg.overrides[id].buffer = to_buffer(key, value);
      } else {
        throw ConfigError(key, "unknown key");
      }
      continue;
    }

    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    it->second(cfg, key, value);
    if (key == "workload.segments") have_segments = true;
  }

  for (const char* required : {"topology.proxies", "run.duration", "run.seed"}) {
    if (!seen.count(required)) throw ConfigError(required, "missing required key");
  }
  if (!have_segments) cfg.workload.segments = {{0.0, cfg.duration, 10.0}};
  validate(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("", "cannot read scenario file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

std::string emit_scenario(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "topology.uacs = " << c.uacs << '\n';
  o << "topology.proxies = " << c.proxies << '\n';
  o << "topology.cluster = " << c.cluster << '\n';
  o << "topology.alternate = " << (c.alternate ? "true" : "false") << '\n';
  o << "server.mu = " << num(c.mu) << '\n';
  o << "server.buffer = " << buffer_str(c.buffer) << '\n';
  o << "server.service = "
    << (c.service == ServiceDistribution::Exponential ? "exponential" : "deterministic") << '\n';
  o << "server.reject_cost = " << num(c.reject_cost) << '\n';
  o << "server.reroute = " << (c.reroute ? "true" : "false") << '\n';
  for (const auto& [id, ov] : c.overrides) {
    if (ov.mu) o << "server." << id << ".mu = " << num(*ov.mu) << '\n';
    if (ov.buffer) o << "server." << id << ".buffer = " << buffer_str(*ov.buffer) << '\n';
  }
  o << "timers.t1 = " << num(c.t1) << '\n';
  o << "timers.t2 = " << num(c.t2) << '\n';
  o << "link.loss = " << num(c.loss) << '\n';
  o << "link.delay = " << num(c.link_delay) << '\n';

  o << "workload.segments = ";
  for (std::size_t i = 0; i < c.workload.segments.size(); ++i) {
    const auto& s = c.workload.segments[i];
    o << (i ? ", " : "") << num(s.start) << ':' << num(s.end) << ':' << num(s.rate);
  }
  o << '\n';
  o << "workload.process = "
    << (c.workload.process == ArrivalProcess::Poisson ? "poisson" : "deterministic") << '\n';
  o << "workload.slowdown = ";
  for (std::size_t i = 0; i < c.workload.slowdowns.size(); ++i) {
    const auto& s = c.workload.slowdowns[i];
    o << (i ? ", " : "") << s.server << ':' << num(s.window.start) << ':' << num(s.window.end)
      << ':' << num(s.window.multiplier);
  }
  o << '\n';
  o << "workload.hold = " << num(c.hold) << '\n';
  o << "workload.teardown = " << (c.teardown ? "true" : "false") << '\n';

  const auto& k = c.controller;
  o << "controller.name = " << to_string(k.name) << '\n';
  if (!k.server.empty()) o << "controller.server = " << k.server << '\n';
  o << "controller.tick = " << num(k.tick) << '\n';
  o << "controller.high = " << num(k.high) << '\n';
  o << "controller.low = " << num(k.low) << '\n';
  o << "controller.q_target = " << num(k.q_target) << '\n';
  o << "controller.rho_target = " << num(k.rho_target) << '\n';
  o << "controller.gain = " << num(k.gain) << '\n';
  o << "controller.meter_window = " << num(k.meter_window) << '\n';
  o << "controller.thresholds = " << (k.thresholds ? "true" : "false") << '\n';
  o << "controller.th_low = " << num(k.th_low) << '\n';
  o << "controller.th_high = " << num(k.th_high) << '\n';
  o << "controller.window = " << k.window << '\n';
  o << "controller.d_target = " << num(k.d_target) << '\n';
  o << "controller.p_min = " << num(k.p_min) << '\n';
  o << "controller.horizon = " << num(k.horizon) << '\n';
  o << "controller.tuning_gain = " << num(k.tuning_gain) << '\n';
  o << "controller.setpoint = " << num(k.setpoint) << '\n';
  o << "controller.kp = " << num(k.kp) << '\n';
  o << "controller.ki = " << num(k.ki) << '\n';
  o << "controller.alpha = " << num(k.alpha) << '\n';
  o << "controller.ratio_window = " << num(k.ratio_window) << '\n';
  o << "controller.denominator = "
    << (k.denominator == RatioDenominator::Retransmissions ? "retransmissions" : "messages") << '\n';

  o << "balancer.name = " << (c.balancer ? to_string(*c.balancer) : "none") << '\n';
  o << "balancer.invite_cost = " << num(c.costs.invite_transaction) << '\n';
  o << "balancer.bye_cost = " << num(c.costs.bye_transaction) << '\n';
  o << "fluid.enabled = " << (c.fluid ? "true" : "false") << '\n';
  o << "fluid.dt = " << num(c.fluid_dt) << '\n';
  o << "fluid.redundant_responses = " << (c.fluid_redundant_responses ? "true" : "false") << '\n';
  o << "run.duration = " << num(c.duration) << '\n';
  o << "run.seed = " << c.seed << '\n';
  o << "run.sample = " << num(c.sample) << '\n';
  o << "run.drain = " << (c.drain ? "true" : "false") << '\n';
  o << "run.out = " << c.out << '\n';
  return o.str();
}

}  // namespace sipov
