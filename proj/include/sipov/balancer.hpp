#pragma once

// Session-aware dispatch of new calls across a cluster: fewest active calls
// (CJSQ), fewest active transactions (TJSQ), least estimated work left (TLWL).

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sipov/sip.hpp"

namespace sipov {

enum class BalancerAlgorithm : std::uint8_t { Cjsq, Tjsq, Tlwl };

std::string_view to_string(BalancerAlgorithm a);

struct CostTable {
  double invite_transaction = 2.0;
  double bye_transaction = 1.0;

  double cost(Method m) const { return m == Method::Invite ? invite_transaction : bye_transaction; }

  bool operator==(const CostTable&) const = default;
};

struct ClusterView {
  std::vector<std::int64_t> active_calls;
  std::vector<std::int64_t> active_transactions;
  std::vector<double> work_left;
  CostTable cost_table;
  std::unordered_map<CallId, std::size_t> affinity;

  explicit ClusterView(std::size_t servers = 0, CostTable costs = {})
      : active_calls(servers, 0), active_transactions(servers, 0), work_left(servers, 0.0),
        cost_table(costs) {}

  std::size_t size() const { return active_calls.size(); }
};

std::size_t cjsq_pick(const ClusterView& view);
std::size_t tjsq_pick(const ClusterView& view);

/// Picks the least-loaded server and charges it `new_call_cost`.
std::size_t tlwl_pick(ClusterView& view, double new_call_cost);

/// Ledger-keeping front end used by the simulator. A call is pinned to the
/// server chosen at dispatch; transactions are counted from dispatch until
/// their final response.
class Balancer {
 public:
  Balancer(BalancerAlgorithm algorithm, std::size_t servers, CostTable costs = {});

  BalancerAlgorithm algorithm() const { return algorithm_; }
  const ClusterView& view() const { return view_; }

  /// Returns the pinned server for a known call, otherwise dispatches it.
  std::size_t dispatch(CallId call);
  bool assigned(CallId call) const { return view_.affinity.count(call) != 0; }
  std::size_t server_of(CallId call) const;

  void transaction_started(CallId call, Method m);
  void transaction_completed(CallId call, Method m);
  void call_ended(CallId call);

 private:
  BalancerAlgorithm algorithm_;
  ClusterView view_;
  std::unordered_map<CallId, std::uint8_t> open_;  // bit per method
  std::unordered_map<CallId, bool> live_;
};

}  // namespace sipov
