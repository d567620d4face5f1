#include "sipov/balancer.hpp"

#include <stdexcept>

#include "sipov/errors.hpp"

namespace sipov {

std::string_view to_string(BalancerAlgorithm a) {
  switch (a) {
    case BalancerAlgorithm::Cjsq: return "cjsq";
    case BalancerAlgorithm::Tjsq: return "tjsq";
    case BalancerAlgorithm::Tlwl: return "tlwl";
  }
  return "?";
}

namespace {

template <typename T>
std::size_t argmin_lowest_index(const std::vector<T>& v) {
  if (v.empty()) throw ParameterError("empty cluster");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

std::uint8_t bit(Method m) { return m == Method::Invite ? 1u : 2u; }

}  // namespace

std::size_t cjsq_pick(const ClusterView& view) { return argmin_lowest_index(view.active_calls); }

std::size_t tjsq_pick(const ClusterView& view) {
  return argmin_lowest_index(view.active_transactions);
}

std::size_t tlwl_pick(ClusterView& view, double new_call_cost) {
  const std::size_t i = argmin_lowest_index(view.work_left);
  view.work_left[i] += new_call_cost;
  return i;
}

Balancer::Balancer(BalancerAlgorithm algorithm, std::size_t servers, CostTable costs)
    : algorithm_(algorithm), view_(servers, costs) {
  if (servers == 0) throw ParameterError("balancer needs at least one server");
}

std::size_t Balancer::server_of(CallId call) const {
  auto it = view_.affinity.find(call);
  if (it == view_.affinity.end()) throw ConsistencyError("call has no assigned server");
  return it->second;
}

std::size_t Balancer::dispatch(CallId call) {
  if (auto it = view_.affinity.find(call); it != view_.affinity.end()) return it->second;

  const double cost = view_.cost_table.cost(Method::Invite);
  std::size_t chosen = 0;
  switch (algorithm_) {
    case BalancerAlgorithm::Cjsq: chosen = cjsq_pick(view_); break;
    case BalancerAlgorithm::Tjsq: chosen = tjsq_pick(view_); break;
    case BalancerAlgorithm::Tlwl: chosen = tlwl_pick(view_, cost); break;
  }
  if (algorithm_ != BalancerAlgorithm::Tlwl) view_.work_left[chosen] += cost;
  view_.affinity.emplace(call, chosen);
  view_.active_calls[chosen] += 1;
  view_.active_transactions[chosen] += 1;
  open_[call] = bit(Method::Invite);
  live_[call] = true;
  return chosen;
}

void Balancer::transaction_started(CallId call, Method m) {
  const std::size_t s = server_of(call);
  auto& open = open_[call];
  if (open & bit(m)) return;
  open |= bit(m);
  view_.active_transactions[s] += 1;
  view_.work_left[s] += view_.cost_table.cost(m);
}

void Balancer::transaction_completed(CallId call, Method m) {
  auto it = open_.find(call);
  if (it == open_.end() || !(it->second & bit(m))) return;
  it->second &= static_cast<std::uint8_t>(~bit(m));
  const std::size_t s = server_of(call);
  view_.active_transactions[s] -= 1;
  view_.work_left[s] -= view_.cost_table.cost(m);
  if (view_.active_transactions[s] < 0 || view_.work_left[s] < -1e-9) {
    throw ConsistencyError("balancer ledger went negative");
  }
}

void Balancer::call_ended(CallId call) {
  auto it = live_.find(call);
  if (it == live_.end() || !it->second) return;
  transaction_completed(call, Method::Invite);
  transaction_completed(call, Method::Bye);
  it->second = false;
  view_.active_calls[server_of(call)] -= 1;
  open_.erase(call);
}

}  // namespace sipov
