#pragma once

// Independent recount of cluster load from a raw event ledger. Every query
// replays the whole ledger, so it shares no state with Balancer.

#include <cstdint>
#include <map>
#include <vector>

#include "sipov/balancer.hpp"
#include "sipov/random.hpp"

namespace sipov::fixtures {

struct LedgerEntry {
  enum class Op { Dispatch, Start, Complete, End } op;
  CallId call;
  std::size_t server;
  Method method;
};

class LedgerOracle {
 public:
  explicit LedgerOracle(std::size_t servers, CostTable costs) : n_(servers), costs_(costs) {}

  void add(LedgerEntry e) { ledger_.push_back(e); }

  struct Totals {
    std::vector<double> calls, transactions, work;
  };

  Totals replay() const {
    Totals t{std::vector<double>(n_, 0.0), std::vector<double>(n_, 0.0), std::vector<double>(n_, 0.0)};
    std::map<CallId, std::pair<bool, bool>> open;  // invite, bye
    std::map<CallId, bool> live;
    for (const auto& e : ledger_) {
      auto& o = open[e.call];
      bool& slot = e.method == Method::Invite ? o.first : o.second;
      switch (e.op) {
        case LedgerEntry::Op::Dispatch:
          t.calls[e.server] += 1;
          live[e.call] = true;
          o.first = true;
          break;
        case LedgerEntry::Op::Start:
          slot = true;
          break;
        case LedgerEntry::Op::Complete:
          slot = false;
          break;
        case LedgerEntry::Op::End:
          if (live[e.call]) t.calls[e.server] -= 1;
          live[e.call] = false;
          o = {false, false};
          break;
      }
    }
    // Rebuild transaction counts from the final open set.
    std::map<CallId, std::size_t> where;
    for (const auto& e : ledger_)
      if (e.op == LedgerEntry::Op::Dispatch) where[e.call] = e.server;
    for (const auto& [call, o] : open) {
      const std::size_t s = where.at(call);
      if (o.first) {
        t.transactions[s] += 1;
        t.work[s] += costs_.cost(Method::Invite);
      }
      if (o.second) {
        t.transactions[s] += 1;
        t.work[s] += costs_.cost(Method::Bye);
      }
    }
    return t;
  }

  std::size_t argmin(BalancerAlgorithm a) const {
    const auto t = replay();
    const auto& v = a == BalancerAlgorithm::Cjsq ? t.calls
                    : a == BalancerAlgorithm::Tjsq ? t.transactions
                                                   : t.work;
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] < v[best] - 1e-9) best = i;
    return best;
  }

 private:
  std::size_t n_;
  CostTable costs_;
  std::vector<LedgerEntry> ledger_;
};

struct OracleRun {
  std::size_t picks = 0;
  std::size_t mismatches = 0;
};

// Drives a Balancer with a random mix of dispatches, transaction starts and
// completions, and call ends; checks every pick against the oracle. The
// ledger replay is quadratic, so live calls are capped to keep it bounded.
inline OracleRun run_ledger_oracle(BalancerAlgorithm algorithm, std::size_t servers,
                                   std::size_t dispatches, std::uint64_t seed) {
  const CostTable costs{2.0, 1.0};
  Balancer b(algorithm, servers, costs);
  LedgerOracle oracle(servers, costs);
  Substream rng(seed);
  std::vector<CallId> live;
  std::map<CallId, std::pair<bool, bool>> open;
  OracleRun out;
  CallId next = 1;
  // Oracle replay cost grows with the ledger; restart a fresh pair in chunks.
  std::size_t since_reset = 0;
  while (out.picks < dispatches) {
    if (since_reset >= 500) {
      b = Balancer(algorithm, servers, costs);
      oracle = LedgerOracle(servers, costs);
      live.clear();
      open.clear();
      since_reset = 0;
    }
    const double u = rng.uniform();
    if (u < 0.4 || live.empty()) {
      const std::size_t want = oracle.argmin(algorithm);
      const CallId c = next++;
      const std::size_t got = b.dispatch(c);
      ++out.picks;
      ++since_reset;
      if (got != want) ++out.mismatches;
      oracle.add({LedgerEntry::Op::Dispatch, c, got, Method::Invite});
      live.push_back(c);
      open[c] = {true, false};
      continue;
    }
    const std::size_t idx = static_cast<std::size_t>(rng.uniform() * live.size());
    const CallId c = live[idx];
    const std::size_t s = b.server_of(c);
    auto& o = open[c];
    if (u < 0.6) {
      if (o.first) {
        b.transaction_completed(c, Method::Invite);
        oracle.add({LedgerEntry::Op::Complete, c, s, Method::Invite});
        o.first = false;
      }
    } else if (u < 0.75) {
      if (!o.second) {
        b.transaction_started(c, Method::Bye);
        oracle.add({LedgerEntry::Op::Start, c, s, Method::Bye});
        o.second = true;
      }
    } else if (u < 0.85) {
      if (o.second) {
        b.transaction_completed(c, Method::Bye);
        oracle.add({LedgerEntry::Op::Complete, c, s, Method::Bye});
        o.second = false;
      }
    } else {
      b.call_ended(c);
      oracle.add({LedgerEntry::Op::End, c, s, Method::Invite});
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(idx));
      open.erase(c);
    }
  }
  return out;
}

}  // namespace sipov::fixtures
