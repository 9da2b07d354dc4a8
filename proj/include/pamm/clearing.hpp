#ifndef PAMM_CLEARING_HPP
#define PAMM_CLEARING_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pamm/errors.hpp"
#include "pamm/orders.hpp"

namespace pamm {

struct MatchedPair {
    std::string unit_id;
    std::string bid_id;
    double settle_price = 0.0;  // equals the unit's ask in the matching mechanism
};

struct Matching {
    std::vector<MatchedPair> pairs;

    double weight() const {
        double w = 0.0;
        for (const auto& p : pairs) w += p.settle_price;
        return w;
    }
};

// Bipartite graph on listings and bids: edge (u, b) iff ask(u) <= price(b),
// weighted by the ask.
struct AuctionGraph {
    std::vector<UnitListing> units;              // ask desc
    std::vector<Bid> bids;                       // price desc
    std::vector<std::pair<int, int>> edges;      // (unit index, bid index)
};

namespace detail {

inline bool unit_clearing_order(const UnitListing& l, const UnitListing& r) {
    if (l.ask != r.ask) return l.ask > r.ask;
    return l.unit_id < r.unit_id;  // argmax ties go to the least id
}

inline bool bid_clearing_order(const Bid& l, const Bid& r) {
    if (l.price != r.price) return l.price > r.price;
    return l.id < r.id;
}

}  // namespace detail

inline AuctionGraph build_auction_graph(std::vector<UnitListing> units,
                                        std::vector<Bid> bids) {
    std::sort(units.begin(), units.end(), detail::unit_clearing_order);
    std::sort(bids.begin(), bids.end(), detail::bid_clearing_order);
    AuctionGraph g;
    for (int u = 0; u < static_cast<int>(units.size()); ++u)
        for (int b = 0; b < static_cast<int>(bids.size()); ++b)
            if (units[u].ask <= bids[b].price) g.edges.emplace_back(u, b);
    g.units = std::move(units);
    g.bids = std::move(bids);
    return g;
}

struct DutchFill {
    std::string bid_id;
    std::string user;
    double price = 0.0;
};

struct DutchResult {
    std::vector<DutchFill> fills;                  // execution order
    std::map<std::string, double> payouts;         // provider -> s_l * sum(prices)
    std::vector<std::pair<std::string, double>> excess_refunds;    // filled bids
    std::vector<std::pair<std::string, double>> unfilled_refunds;  // returned intact
    long long units_sold = 0;
};

// Uniform Dutch auction: execute bids from most to least expensive while units
// remain and the bid clears the floor; every fill pays each provider
// s_l * p(b). Bids below the floor are refunded intact.
inline DutchResult dutch_auction(long long unit_count, std::vector<Bid> bids,
                                 const std::map<std::string, double>& shares,
                                 double floor) {
    std::sort(bids.begin(), bids.end(), bid_book_order);  // price desc, time asc
    DutchResult result;
    for (const auto& [id, share] : shares) result.payouts[id] = 0.0;
    std::size_t i = 0;
    for (; i < bids.size() && result.units_sold < unit_count; ++i) {
        const Bid& b = bids[i];
        if (b.price < floor) break;  // later bids are cheaper still
        result.fills.push_back({b.id, b.user, b.price});
        ++result.units_sold;
        for (const auto& [id, share] : shares) result.payouts[id] += share * b.price;
        if (b.escrow > b.price)
            result.excess_refunds.emplace_back(b.id, b.escrow - b.price);
    }
    for (; i < bids.size(); ++i)
        result.unfilled_refunds.emplace_back(bids[i].id, bids[i].escrow);
    return result;
}

struct GreedyResult {
    Matching matching;
    std::vector<UnitListing> remaining_units;  // unmatched units, skipped ones restored
    std::vector<Bid> remaining_bids;
    long long iterations = 0;  // loop-iteration counter; always <= |U| + |B|
};

// One-pass greedy maximal matching on the auction graph: repeatedly take the
// highest-ask unit and highest-price bid; match them if ask <= price, else
// set the unit aside. Yields at least half the maximum matching weight.
inline GreedyResult greedy_matching(std::vector<UnitListing> units, std::vector<Bid> bids) {
    std::sort(units.begin(), units.end(), detail::unit_clearing_order);
    std::sort(bids.begin(), bids.end(), detail::bid_clearing_order);

    GreedyResult result;
    std::vector<UnitListing> skipped;
    std::size_t u = 0, b = 0;
    while (u < units.size() && b < bids.size() &&
           units.back().ask <= bids[b].price) {  // the graph still has an edge
        ++result.iterations;
        if (units[u].ask <= bids[b].price) {
            result.matching.pairs.push_back({units[u].unit_id, bids[b].id, units[u].ask});
            ++u;
            ++b;
        } else {
            skipped.push_back(units[u]);
            ++u;
        }
    }
    result.remaining_units = std::move(skipped);  // skipped asks exceed all leftovers
    result.remaining_units.insert(result.remaining_units.end(), units.begin() + u,
                                  units.end());
    result.remaining_bids.assign(bids.begin() + b, bids.end());
    return result;
}

enum class ExactMode {
    exhaustive,  // bitmask search over all matchings; desk-scale oracle
    augmenting,  // polynomial: descending-ask insertion with augmenting paths
};

namespace detail {

inline Matching exact_exhaustive(const AuctionGraph& g) {
    const int nu = static_cast<int>(g.units.size());
    const int nb = static_cast<int>(g.bids.size());
    std::vector<std::vector<int>> adj(nu);
    for (auto [u, b] : g.edges) adj[u].push_back(b);

    // best[i][mask]: max weight matching units i.. with the bid set `mask` free
    const std::size_t nmask = std::size_t{1} << nb;
    std::vector<std::vector<double>> best(nu + 1, std::vector<double>(nmask, 0.0));
    for (int i = nu - 1; i >= 0; --i) {
        for (std::size_t mask = 0; mask < nmask; ++mask) {
            double w = best[i + 1][mask];
            for (int b : adj[i])
                if (mask & (std::size_t{1} << b))
                    w = std::max(w, g.units[i].ask + best[i + 1][mask ^ (std::size_t{1} << b)]);
            best[i][mask] = w;
        }
    }

    Matching m;
    std::size_t mask = nmask - 1;
    for (int i = 0; i < nu; ++i) {
        if (best[i][mask] == best[i + 1][mask]) continue;
        for (int b : adj[i]) {
            if ((mask & (std::size_t{1} << b)) &&
                best[i][mask] == g.units[i].ask + best[i + 1][mask ^ (std::size_t{1} << b)]) {
                m.pairs.push_back({g.units[i].unit_id, g.bids[b].id, g.units[i].ask});
                mask ^= std::size_t{1} << b;
                break;
            }
        }
    }
    return m;
}

inline bool try_augment(int u, const std::vector<std::vector<int>>& adj,
                        std::vector<int>& bid_owner, std::vector<char>& visited) {
    for (int b : adj[u]) {
        if (visited[b]) continue;
        visited[b] = 1;
        if (bid_owner[b] < 0 || try_augment(bid_owner[b], adj, bid_owner, visited)) {
            bid_owner[b] = u;
            return true;
        }
    }
    return false;
}

// Edge weights depend only on the unit, so inserting units in descending ask
// order and keeping each one that still admits an augmenting path is exact
// (greedy over the transversal matroid).
inline Matching exact_augmenting(const AuctionGraph& g) {
    const int nu = static_cast<int>(g.units.size());
    const int nb = static_cast<int>(g.bids.size());
    std::vector<std::vector<int>> adj(nu);
    for (auto [u, b] : g.edges) adj[u].push_back(b);

    std::vector<int> bid_owner(nb, -1);
    for (int u = 0; u < nu; ++u) {  // units arrive ask-descending from build_auction_graph
        std::vector<char> visited(nb, 0);
        try_augment(u, adj, bid_owner, visited);
    }

    Matching m;
    std::vector<std::pair<int, int>> assigned;
    for (int b = 0; b < nb; ++b)
        if (bid_owner[b] >= 0) assigned.emplace_back(bid_owner[b], b);
    std::sort(assigned.begin(), assigned.end());
    for (auto [u, b] : assigned)
        m.pairs.push_back({g.units[u].unit_id, g.bids[b].id, g.units[u].ask});
    return m;
}

}  // namespace detail

// Maximum weight matching of the auction graph. The exhaustive mode is the
// desk-scale oracle and refuses instances with |U| + |B| beyond the limit.
inline Matching exact_max_weight_matching(const AuctionGraph& g,
                                          ExactMode mode = ExactMode::exhaustive,
                                          int exhaustive_limit = 16) {
    if (mode == ExactMode::exhaustive) {
        if (static_cast<int>(g.units.size() + g.bids.size()) > exhaustive_limit)
            throw SizeLimitError("exact_max_weight_matching: instance too large "
                                 "for exhaustive mode");
        return detail::exact_exhaustive(g);
    }
    return detail::exact_augmenting(g);
}

struct Settlement {
    struct Payment {
        std::string owner;
        std::string unit_id;
        std::string bid_id;
        double price = 0.0;
    };
    std::vector<Payment> payments;                        // one per matched pair
    std::map<std::string, double> owner_totals;           // owner -> sum of asks
    std::vector<std::pair<std::string, double>> refunds;  // matched bid -> escrow excess
};

// Each matched bid pays the unit's ask, entirely to the unit's owner.
inline Settlement settle_matching(const Matching& m, const std::vector<UnitListing>& units,
                                  const std::vector<Bid>& bids) {
    std::map<std::string, const UnitListing*> unit_by_id;
    std::map<std::string, const Bid*> bid_by_id;
    for (const auto& u : units) unit_by_id[u.unit_id] = &u;
    for (const auto& b : bids) bid_by_id[b.id] = &b;

    Settlement s;
    std::set<std::string> settled_units, settled_bids;
    for (const auto& pair : m.pairs) {
        if (!settled_units.insert(pair.unit_id).second ||
            !settled_bids.insert(pair.bid_id).second)
            throw DoubleSettlementError("settle_matching: " + pair.unit_id + "/" +
                                        pair.bid_id + " settled twice");
        auto u_it = unit_by_id.find(pair.unit_id);
        auto b_it = bid_by_id.find(pair.bid_id);
        if (u_it == unit_by_id.end() || b_it == bid_by_id.end())
            throw ValidationError("settle_matching: pair not in the clearing snapshot");
        const UnitListing& u = *u_it->second;
        const Bid& b = *b_it->second;
        if (u.ask > b.price)
            throw ValidationError("settle_matching: ask exceeds bid price");
        s.payments.push_back({u.owner, u.unit_id, b.id, pair.settle_price});
        s.owner_totals[u.owner] += pair.settle_price;
        if (b.escrow > pair.settle_price)
            s.refunds.emplace_back(b.id, b.escrow - pair.settle_price);
    }
    return s;
}

struct ResidualResult {
    std::vector<MatchedPair> fills;                // at the floor price
    std::map<std::string, double> payouts;         // pro-rata by share
    std::vector<std::pair<std::string, double>> excess_refunds;    // filled bids
    std::vector<std::pair<std::string, double>> unfilled_refunds;  // returned intact
    std::vector<UnitListing> leftover_units;
};

// Any-price second phase: remaining bids (highest first) take remaining units
// at the floor price, proceeds split pro-rata. Afterwards no unit/bid pair
// with ask <= bid remains, provided every bid clears the floor.
inline ResidualResult residual_clearing(std::vector<UnitListing> units,
                                        std::vector<Bid> bids,
                                        const std::map<std::string, double>& shares,
                                        double floor = 0.0) {
    std::sort(units.begin(), units.end(), detail::unit_clearing_order);
    std::sort(bids.begin(), bids.end(), detail::bid_clearing_order);
    ResidualResult r;
    for (const auto& [id, share] : shares) r.payouts[id] = 0.0;
    std::size_t u = 0;
    for (const auto& b : bids) {
        if (u < units.size() && b.price >= floor) {
            r.fills.push_back({units[u].unit_id, b.id, floor});
            for (const auto& [id, share] : shares) r.payouts[id] += share * floor;
            if (b.escrow > floor) r.excess_refunds.emplace_back(b.id, b.escrow - floor);
            ++u;
        } else {
            r.unfilled_refunds.emplace_back(b.id, b.escrow);
        }
    }
    r.leftover_units.assign(units.begin() + u, units.end());
    return r;
}

// Structured record of one clearing phase, for traces and reports.
struct ClearingReport {
    std::string mechanism;  // "dutch" or "matching"
    struct Fill {
        std::string unit_id;  // empty for dutch (units are interchangeable)
        std::string bid_id;
        std::string payee;  // owner for matching fills; empty for pro-rata
        double price = 0.0;
    };
    std::vector<Fill> fills;
    std::vector<Fill> residual_fills;
    std::vector<std::pair<std::string, double>> refunds;
    std::map<std::string, double> payouts;  // pro-rata payouts (dutch + residual)
    double greedy_weight = 0.0;
    double exact_weight = -1.0;  // filled in when the oracle is enabled
    long long greedy_iterations = 0;
    long long units_cleared = 0;
    long long snapshot_units = 0;
    long long snapshot_bids = 0;
};

}  // namespace pamm

#endif
