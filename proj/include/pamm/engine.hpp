#ifndef PAMM_ENGINE_HPP
#define PAMM_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pamm/beliefs.hpp"
#include "pamm/clearing.hpp"
#include "pamm/curve.hpp"
#include "pamm/errors.hpp"
#include "pamm/loss.hpp"
#include "pamm/orders.hpp"
#include "pamm/pool.hpp"
#include "pamm/scenario.hpp"
#include "pamm/trace.hpp"

namespace pamm {

// End-of-run snapshot taken just before retrieval, plus the clearing record.
// Everything the verifier compares a trace replay against.
struct FinalSummary {
    PoolState pre_retrieval_reserves;
    std::map<std::string, double> shares;     // at retrieval
    std::map<std::string, double> fees;       // accrued, paid out at retrieval
    std::map<std::string, double> constants;
    double aggregate_c = 0.0;
    bool halted_early = false;
    double initial_y = 0.0;
    double escrow_outstanding = 0.0;  // should be zero once clearing settles
    std::vector<UnitListing> leftover_units;
    struct RefundedBid {
        std::string id;
        double price = 0.0;
        double amount = 0.0;
    };
    std::vector<RefundedBid> unfilled_bids;  // refunded without a unit
    ClearingReport clearing;
};

struct RunResult {
    std::vector<TraceEvent> trace;
    FinalSummary final_state;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t seed, const std::string& s) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline double draw_valuation(const ValuationSpec& v, std::mt19937_64& rng) {
    if (v.dist == "uniform") return v.lo + (v.hi - v.lo) * uniform01(rng);
    double mu = std::log(v.mean) - 0.5 * v.sigma * v.sigma;
    return std::exp(mu + v.sigma * normal01(rng));
}

}  // namespace detail

// Deterministic discrete-event engine: integer ticks, epoch actions before
// the tick, agent actions after, clearing right before retrieval.
class Engine {
public:
    explicit Engine(Scenario scenario) : sc_(std::move(scenario)) {
        sc_.validate();
        // intra-tick ordering is by agent id, not declaration order
        std::sort(sc_.agents.begin(), sc_.agents.end(),
                  [](const Agent& l, const Agent& r) { return l.id < r.id; });
    }

    RunResult run() {
        EpochSchedule sched = sc_.schedule();
        Pool pool(PoolState{sc_.pool_x, sc_.pool_y}, sc_.founder_id, sc_.founder_constant,
                  sc_.bounds, sched, sc_.fee_rate, sc_.founder_ask);
        OrderBook book(sched.clearing_time, sc_.min_bid_increment);

        trace_.clear();
        seq_ = 0;
        escrow_outstanding_ = 0.0;
        orders_at_join_.clear();
        orders_at_join_[sc_.founder_id] = {};

        // genesis: the founding provider's deposit seeds the reserves
        {
            TraceEvent e = base(0, "join", sc_.founder_id);
            e.detail = "genesis";
            e.x_amount = sc_.pool_x;
            e.y_amount = sc_.pool_y;
            e.share = 1.0;
            e.c_value = pool.curve().c;
            e.price = spot_price(pool.curve(), pool.state().x);
            push(e);
        }

        std::map<std::string, std::mt19937_64> agent_rng;
        for (const auto& agent : sc_.agents)
            agent_rng.emplace(agent.id, std::mt19937_64(detail::fnv1a(sc_.seed, agent.id)));

        for (Tick t = 0; t <= sched.retrieval_time; ++t) {
            pool.set_clock(t);

            if (sched.is_epoch(t)) {
                for (const auto& agent : sc_.agents)
                    if (agent.type == "provider")
                        for (const auto& act : agent.script)
                            if (act.time == t) apply_provider_action(pool, book, agent, act, t);
                if (!pool.halted()) {
                    pool.epoch_tick(t);
                    TraceEvent e = base(t, "tick", "");
                    e.x_amount = pool.state().x;
                    e.y_amount = pool.state().y;
                    e.c_value = pool.curve().c;
                    push(e);
                    match_book(pool, book, t);
                    emit_metrics(pool, book, t);
                }
            }

            if (t < sched.clearing_time) {
                for (const auto& agent : sc_.agents) {
                    if (agent.type == "provider") continue;
                    for (const auto& act : agent.script)
                        if (act.time == t) apply_market_action(pool, book, agent, act, t);
                    bool fires = std::find(agent.policy_times.begin(), agent.policy_times.end(),
                                           t) != agent.policy_times.end();
                    if (fires && !pool.halted())
                        apply_policy(pool, book, agent, agent_rng.at(agent.id), t);
                }
            }

            if (t == sched.clearing_time) run_clearing(pool, book, t);
        }

        // retrieval: pro-rata payout of remaining reserves plus accrued fees
        RunResult result;
        capture_final(pool, result.final_state);
        for (auto& [id, payout] : pool.retrieve_all()) {
            TraceEvent e = base(sched.retrieval_time, "exit", id);
            e.detail = "retrieval";
            e.x_amount = payout.x;
            e.y_amount = payout.y;
            e.fee = payout.fees;
            push(e);
        }
        result.final_state.escrow_outstanding = escrow_outstanding_;
        result.trace = std::move(trace_);
        return result;
    }

private:
    TraceEvent base(Tick t, const std::string& kind, const std::string& actor) {
        TraceEvent e;
        e.seq = seq_++;
        e.time = t;
        e.kind = kind;
        e.actor = actor;
        return e;
    }

    void push(const TraceEvent& e) { trace_.push_back(e); }

    [[noreturn]] void context_throw(const Error& err, Tick t, const std::string& actor,
                                    const std::string& op) {
        throw Error("t=" + std::to_string(t) + " agent=" + actor + " op=" + op + ": " +
                    err.what());
    }

    void emit_fee_credits(const Pool& pool, double fee, Tick t, const std::string& source) {
        if (fee <= 0.0) return;
        for (const auto& [id, lp] : pool.providers()) {
            TraceEvent e = base(t, "fee_credit", id);
            e.detail = source;
            e.x_amount = lp.share * fee;
            push(e);
        }
    }

    void match_book(Pool& pool, OrderBook& book, Tick t) {
        for (const auto& fill : book.match_against_amm(pool)) {
            TraceEvent e = base(t, "bid_fill", fill.user);
            e.detail = "amm";
            e.ref = fill.bid_id;
            e.units = 1.0;
            e.price = fill.charged;
            e.x_amount = fill.refund;
            e.fee = fill.fee;
            push(e);
            escrow_outstanding_ -= fill.charged + fill.refund;
            emit_fee_credits(pool, fill.fee, t, "amm");
        }
    }

    void apply_provider_action(Pool& pool, OrderBook& book, const Agent& agent,
                               const AgentAction& act, Tick t) {
        try {
            if (act.op == "join") {
                // the same expression the pool evaluates, on the pre-join state
                double deposit_y = act.deposit_x * pool.state().y / pool.state().x;
                pool.join(agent.id, act.deposit_x, act.constant, t, act.ask);
                orders_at_join_[agent.id] = open_bid_prices(book);
                TraceEvent e = base(t, "join", agent.id);
                e.x_amount = act.deposit_x;
                e.y_amount = deposit_y;
                e.share = pool.provider(agent.id).share;
                e.c_value = pool.curve().c;
                e.price = spot_price(pool.curve(), pool.state().x);
                push(e);
                match_book(pool, book, t);
            } else if (act.op == "exit") {
                auto payout = pool.remove_liquidity(agent.id, t);
                TraceEvent e = base(t, "exit", agent.id);
                e.detail = "exit";
                e.x_amount = payout.x;
                e.y_amount = payout.y;
                e.fee = payout.fees;
                e.share = share_of_exit(payout.x, pool);
                if (!pool.halted()) e.c_value = pool.curve().c;
                push(e);
                if (!pool.halted()) match_book(pool, book, t);
            } else if (act.op == "set_constant") {
                pool.update_constant(agent.id, act.constant, t);
                TraceEvent e = base(t, "set_constant", agent.id);
                e.c_value = act.constant;
                push(e);
            } else if (act.op == "set_ask") {
                pool.set_unit_ask(agent.id, act.ask);
                TraceEvent e = base(t, "set_constant", agent.id);
                e.detail = "ask";
                e.price = act.ask;
                push(e);
            }
        } catch (const Error& err) {
            context_throw(err, t, agent.id, act.op);
        }
    }

    static double share_of_exit(double payout_x, const Pool& pool) {
        double x_before = pool.state().x + payout_x;
        return x_before > 0.0 ? payout_x / x_before : 1.0;
    }

    void apply_market_action(Pool& pool, OrderBook& book, const Agent& agent,
                             const AgentAction& act, Tick t) {
        try {
            if (act.op == "bid") {
                std::string id = book.submit_bid(agent.id, act.price, t, act.hidden);
                escrow_outstanding_ += act.price;
                TraceEvent e = base(t, "bid_submit", agent.id);
                e.ref = id;
                e.detail = act.hidden ? "hidden" : "";
                e.price = act.price;
                e.x_amount = act.price;
                push(e);
                match_book(pool, book, t);
            } else if (act.op == "raise") {
                const Bid* open = latest_open_bid(book, agent.id);
                if (open == nullptr)
                    throw MembershipError("raise: no open bid for agent");
                double delta = act.price - open->escrow;
                std::string bid_id = open->id;
                bool hidden = open->hidden;
                book.raise_bid(bid_id, act.price);
                escrow_outstanding_ += delta;
                TraceEvent e = base(t, "bid_raise", agent.id);
                e.ref = bid_id;
                e.detail = hidden ? "hidden" : "";
                e.price = act.price;
                e.x_amount = delta;
                push(e);
                match_book(pool, book, t);
            } else if (act.op == "buy") {
                auto trade = pool.buy_units(act.units);
                TraceEvent e = base(t, "amm_trade", agent.id);
                e.detail = "buy";
                e.units = static_cast<double>(act.units);
                e.price = trade.gross;
                e.x_amount = trade.curve_x;
                e.fee = trade.fee;
                push(e);
                emit_fee_credits(pool, trade.fee, t, "amm");
                match_book(pool, book, t);
            } else if (act.op == "sell") {
                auto trade = pool.sell_units(act.units);
                TraceEvent e = base(t, "amm_trade", agent.id);
                e.detail = "sell";
                e.units = static_cast<double>(act.units);
                e.price = trade.gross;
                e.x_amount = trade.curve_x;
                e.fee = trade.fee;
                push(e);
                emit_fee_credits(pool, trade.fee, t, "amm");
                match_book(pool, book, t);
            }
        } catch (const Error& err) {
            context_throw(err, t, agent.id, act.op);
        }
    }

    // Stochastic policies, one template per customer type. Bargain hunters
    // bid their valuation (or raise toward it) unless the AMM is already
    // cheaper; normal customers and high flyers take the AMM price or leave.
    void apply_policy(Pool& pool, OrderBook& book, const Agent& agent,
                      std::mt19937_64& rng, Tick t) {
        double v = detail::draw_valuation(agent.valuation, rng);
        bool can_quote = pool.has_unit_inventory();
        double cost = can_quote ? pool.unit_buy_cost_gross()
                                : std::numeric_limits<double>::infinity();
        AgentAction act;
        act.time = t;
        act.units = 1;
        act.hidden = agent.hidden_bids;
        if (agent.type == "bargain_hunter") {
            const Bid* open = latest_open_bid(book, agent.id);
            if (open != nullptr) {
                if (v > open->price) {
                    act.op = "raise";
                    act.price = v;
                    apply_market_action(pool, book, agent, act, t);
                }
            } else if (v >= cost) {
                act.op = "buy";
                apply_market_action(pool, book, agent, act, t);
            } else if (v > sc_.min_bid_increment && v > 0.0) {
                act.op = "bid";
                act.price = v;
                apply_market_action(pool, book, agent, act, t);
            }
        } else {  // normal | high_flyer: immediate take-it-or-leave-it
            if (can_quote && cost <= v) {
                act.op = "buy";
                apply_market_action(pool, book, agent, act, t);
            }
        }
    }

    const Bid* latest_open_bid(const OrderBook& book, const std::string& user) const {
        const Bid* found = nullptr;
        for (const auto& b : book.bids())
            if (b.user == user && (found == nullptr || b.seq > found->seq)) found = &b;
        return found;
    }

    std::vector<double> open_bid_prices(const OrderBook& book) const {
        std::vector<double> prices;
        for (const auto& b : book.bids()) prices.push_back(b.price);
        return prices;
    }

    void emit_metrics(const Pool& pool, const OrderBook& book, Tick t) {
        auto prices = open_bid_prices(book);
        for (const auto& [id, lp] : pool.providers()) {
            const auto& js = lp.join_snapshot;
            LossSnapshot snap =
                LossSnapshot::make(js.share0, js.x0, js.y0, js.c0, orders_at_join_[id]);
            TraceEvent e = base(t, "metric", id);
            e.share = lp.share;
            e.c_value = pool.curve().c;
            e.dl = divergence_loss(snap, lp.share, pool.state(), pool.curve().c);
            e.order_loss = order_loss(snap, lp.share, pool.state(), prices);
            push(e);
        }
    }

    void run_clearing(Pool& pool, OrderBook& book, Tick t) {
        auto snap = book.snapshot_for_clearing(pool);
        pool.close_market();

        std::map<std::string, double> shares;
        for (const auto& [id, lp] : pool.providers()) shares[id] = lp.share;

        clearing_ = ClearingReport{};
        clearing_.mechanism = sc_.mechanism;
        clearing_.snapshot_units = static_cast<long long>(snap.units.size());
        clearing_.snapshot_bids = static_cast<long long>(snap.bids.size());
        leftover_units_.clear();
        unfilled_bids_.clear();

        std::map<std::string, double> bid_price_by_id;
        for (const auto& b : snap.bids) bid_price_by_id[b.id] = b.price;

        if (sc_.mechanism == "dutch") {
            auto res = dutch_auction(static_cast<long long>(snap.units.size()), snap.bids,
                                     shares, sc_.floor);
            for (const auto& fill : res.fills) {
                TraceEvent e = base(t, "clearing_fill", "");
                e.detail = "dutch";
                e.ref = fill.bid_id;
                e.units = 1.0;
                e.price = fill.price;
                push(e);
                escrow_outstanding_ -= fill.price;
                clearing_.fills.push_back({"", fill.bid_id, "", fill.price});
            }
            pool.withdraw_units(static_cast<double>(res.units_sold));
            clearing_.units_cleared = res.units_sold;
            if (!res.fills.empty()) {
                for (const auto& [id, amount] : res.payouts) {
                    TraceEvent e = base(t, "clearing_fill", id);
                    e.detail = "payout";
                    e.x_amount = amount;
                    push(e);
                    clearing_.payouts[id] = amount;
                }
            }
            emit_excess_refunds(res.excess_refunds, t, "clearing_fill");
            emit_unfilled_refunds(res.unfilled_refunds, bid_price_by_id, t, "clearing_fill");
            leftover_units_.assign(snap.units.begin() + res.units_sold, snap.units.end());
        } else {
            auto greedy = greedy_matching(snap.units, snap.bids);
            clearing_.greedy_weight = greedy.matching.weight();
            clearing_.greedy_iterations = greedy.iterations;
            auto settlement = settle_matching(greedy.matching, snap.units, snap.bids);
            for (const auto& pay : settlement.payments) {
                TraceEvent e = base(t, "clearing_fill", pay.owner);
                e.detail = "match";
                e.ref = pay.bid_id;
                e.ref2 = pay.unit_id;
                e.units = 1.0;
                e.price = pay.price;
                push(e);
                escrow_outstanding_ -= pay.price;
                clearing_.fills.push_back({pay.unit_id, pay.bid_id, pay.owner, pay.price});
            }
            emit_excess_refunds(settlement.refunds, t, "clearing_fill");
            auto residual = residual_clearing(greedy.remaining_units, greedy.remaining_bids,
                                              shares, sc_.floor);
            for (const auto& fill : residual.fills) {
                TraceEvent e = base(t, "residual_fill", "");
                e.detail = "fill";
                e.ref = fill.bid_id;
                e.ref2 = fill.unit_id;
                e.units = 1.0;
                e.price = fill.settle_price;
                push(e);
                escrow_outstanding_ -= fill.settle_price;
                clearing_.residual_fills.push_back(
                    {fill.unit_id, fill.bid_id, "", fill.settle_price});
            }
            for (const auto& [id, amount] : residual.payouts) {
                if (residual.fills.empty()) break;
                TraceEvent e = base(t, "residual_fill", id);
                e.detail = "payout";
                e.x_amount = amount;
                push(e);
                clearing_.payouts[id] += amount;
            }
            emit_excess_refunds(residual.excess_refunds, t, "residual_fill");
            emit_unfilled_refunds(residual.unfilled_refunds, bid_price_by_id, t,
                                  "residual_fill");
            pool.withdraw_units(
                static_cast<double>(greedy.matching.pairs.size() + residual.fills.size()));
            clearing_.units_cleared =
                static_cast<long long>(greedy.matching.pairs.size() + residual.fills.size());
            leftover_units_ = residual.leftover_units;

            if (sc_.oracle) {
                auto graph = build_auction_graph(snap.units, snap.bids);
                ExactMode mode = snap.units.size() + snap.bids.size() <= 16
                                     ? ExactMode::exhaustive
                                     : ExactMode::augmenting;
                clearing_.exact_weight = exact_max_weight_matching(graph, mode).weight();
                TraceEvent e = base(t, "metric", "");
                e.detail = "clearing_oracle";
                e.price = clearing_.greedy_weight;
                e.x_amount = clearing_.exact_weight;
                e.units = static_cast<double>(clearing_.greedy_iterations);
                push(e);
            }
        }
    }

    // Excess escrow returned to a bid that was filled (escrow above the
    // settle price); does not mark the bid as unfilled.
    void emit_excess_refunds(const std::vector<std::pair<std::string, double>>& refunds,
                             Tick t, const std::string& kind) {
        for (const auto& [bid_id, amount] : refunds) {
            TraceEvent e = base(t, kind, "");
            e.detail = "excess";
            e.ref = bid_id;
            e.x_amount = amount;
            push(e);
            escrow_outstanding_ -= amount;
            clearing_.refunds.emplace_back(bid_id, amount);
        }
    }

    void emit_unfilled_refunds(const std::vector<std::pair<std::string, double>>& refunds,
                               const std::map<std::string, double>& bid_price_by_id, Tick t,
                               const std::string& kind) {
        for (const auto& [bid_id, amount] : refunds) {
            TraceEvent e = base(t, kind, "");
            e.detail = "refund";
            e.ref = bid_id;
            e.price = bid_price_by_id.at(bid_id);
            e.x_amount = amount;
            push(e);
            escrow_outstanding_ -= amount;
            clearing_.refunds.emplace_back(bid_id, amount);
            unfilled_bids_.push_back({bid_id, bid_price_by_id.at(bid_id), amount});
        }
    }

    void capture_final(const Pool& pool, FinalSummary& out) {
        out.pre_retrieval_reserves = pool.state();
        for (const auto& [id, lp] : pool.providers()) {
            out.shares[id] = lp.share;
            out.fees[id] = lp.fees_accrued;
            out.constants[id] = lp.constant;
        }
        out.aggregate_c = pool.providers().empty() ? 0.0 : aggregate_constant(pool.providers());
        out.halted_early = pool.halted();
        out.initial_y = sc_.pool_y;
        out.leftover_units = leftover_units_;
        out.unfilled_bids = unfilled_bids_;
        out.clearing = clearing_;
    }

    Scenario sc_;
    std::vector<TraceEvent> trace_;
    std::uint64_t seq_ = 0;
    double escrow_outstanding_ = 0.0;
    std::map<std::string, std::vector<double>> orders_at_join_;
    ClearingReport clearing_;
    std::vector<UnitListing> leftover_units_;
    std::vector<FinalSummary::RefundedBid> unfilled_bids_;
};

inline RunResult run(const Scenario& scenario) { return Engine(scenario).run(); }

}  // namespace pamm

#endif
