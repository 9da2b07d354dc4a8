#ifndef PAMM_VERIFY_HPP
#define PAMM_VERIFY_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pamm/engine.hpp"
#include "pamm/trace.hpp"

namespace pamm {

struct VerifyFailure {
    std::size_t event_index = SIZE_MAX;  // SIZE_MAX for whole-trace checks
    std::string message;
};

struct VerifyReport {
    std::vector<VerifyFailure> failures;
    std::size_t checks_run = 0;

    bool ok() const { return failures.empty(); }

    std::string to_text() const {
        std::ostringstream os;
        os << "verify: " << checks_run << " checks, " << failures.size() << " failures\n";
        for (const auto& f : failures) {
            os << "  FAIL";
            if (f.event_index != SIZE_MAX) os << " @event " << f.event_index;
            os << ": " << f.message << "\n";
        }
        return os.str();
    }
};

namespace detail {

// Full double-entry replay of a trace. Tracks the X ledger (reserves, escrow,
// fee pot, clearing pot, external in/out), the Y ledger, the curve anchor,
// per-bid escrow and price, and per-provider shares and fee balances.
class TraceChecker {
public:
    TraceChecker(const std::vector<TraceEvent>& trace, const FinalSummary& fin,
                 const Scenario& sc)
        : trace_(trace), final_(fin), sc_(sc) {}

    VerifyReport run() {
        for (std::size_t i = 0; i < trace_.size(); ++i) {
            apply(i, trace_[i]);
            check_conservation(i);
        }
        finish();
        return report_;
    }

private:
    struct BidState {
        double price = 0.0;
        double escrow = 0.0;
    };

    static constexpr double kTol = 1e-9;

    void fail(std::size_t i, const std::string& msg) { report_.failures.push_back({i, msg}); }

    void expect(std::size_t i, bool cond, const std::string& msg) {
        ++report_.checks_run;
        if (!cond) fail(i, msg);
    }

    void expect_close(std::size_t i, double got, double want, const std::string& what) {
        double scale = std::max({1.0, std::abs(got), std::abs(want)});
        expect(i, std::abs(got - want) <= kTol * scale,
               what + ": got " + std::to_string(got) + ", want " + std::to_string(want));
    }

    double opt(const std::optional<double>& v) const { return v.value_or(0.0); }

    void rebase_anchor(double c) {
        anchor_c_ = c;
        anchor_k_ = std::pow(rx_, c) * ry_;
    }

    void check_curve(std::size_t i) {
        if (anchor_k_ <= 0.0 || market_closed_) return;
        double resid = std::abs(std::pow(rx_, anchor_c_) * ry_ - anchor_k_) / anchor_k_;
        expect(i, resid <= kTol, "reserves off the active curve, residual " +
                                     std::to_string(resid));
    }

    void apply(std::size_t i, const TraceEvent& e) {
        if (e.kind == "join") {
            double dx = opt(e.x_amount), dy = opt(e.y_amount);
            double s_new = opt(e.share);
            if (e.detail != "genesis")
                for (auto& [id, s] : shares_) s *= (1.0 - s_new);
            shares_[e.actor] = s_new;
            fees_bal_.emplace(e.actor, 0.0);
            rx_ += dx;
            ry_ += dy;
            x_in_ += dx;
            y_in_ += dy;
            rebase_anchor(opt(e.c_value));
        } else if (e.kind == "exit") {
            double dx = opt(e.x_amount), dy = opt(e.y_amount), df = opt(e.fee);
            if (e.detail == "retrieval" && !retrieval_seen_) {
                retrieval_seen_ = true;
                pre_retrieval_ = PoolState{rx_, ry_};
                pre_shares_ = shares_;
                pre_fees_ = fees_bal_;
            }
            rx_ -= dx;
            ry_ -= dy;
            x_out_ += dx + df;
            y_out_ += dy;
            fees_pot_ -= df;
            fees_bal_[e.actor] -= df;
            double s_exit = opt(e.share);
            shares_.erase(e.actor);
            if (e.detail == "exit" && s_exit < 1.0)
                for (auto& [id, s] : shares_) s /= (1.0 - s_exit);
            if (e.detail == "exit" && e.c_value) rebase_anchor(*e.c_value);
        } else if (e.kind == "tick") {
            expect_close(i, rx_, opt(e.x_amount), "tick reserve x");
            expect_close(i, ry_, opt(e.y_amount), "tick reserve y");
            rebase_anchor(opt(e.c_value));
            last_aggregate_ = opt(e.c_value);
        } else if (e.kind == "amm_trade") {
            double gross = opt(e.price), curve_x = opt(e.x_amount), fee = opt(e.fee);
            double units = opt(e.units);
            if (e.detail == "buy") {
                expect_close(i, gross, curve_x + fee, "buy: gross = curve + fee");
                rx_ += curve_x;
                ry_ -= units;
                x_in_ += gross;
                y_out_units_ += units;
            } else {
                expect_close(i, gross, curve_x - fee, "sell: net = curve - fee");
                rx_ -= curve_x;
                ry_ += units;
                x_out_ += gross;
                y_in_units_ += units;
            }
            fees_pot_ += fee;
            check_curve(i);
        } else if (e.kind == "bid_submit") {
            BidState b{opt(e.price), opt(e.x_amount)};
            expect_close(i, b.escrow, b.price, "submit: escrow equals price");
            bids_[e.ref] = b;
            escrow_ += b.escrow;
            x_in_ += b.escrow;
        } else if (e.kind == "bid_raise") {
            auto it = bids_.find(e.ref);
            if (it == bids_.end()) {
                fail(i, "raise of unknown bid " + e.ref);
                return;
            }
            expect(i, opt(e.price) > it->second.price,
                   "bid price did not strictly increase");
            double delta = opt(e.x_amount);
            it->second.price = opt(e.price);
            it->second.escrow += delta;
            escrow_ += delta;
            x_in_ += delta;
        } else if (e.kind == "bid_fill") {
            auto it = bids_.find(e.ref);
            if (it == bids_.end()) {
                fail(i, "fill of unknown bid " + e.ref);
                return;
            }
            double charged = opt(e.price), refund = opt(e.x_amount), fee = opt(e.fee);
            expect(i, charged <= it->second.price + kTol,
                   "fill charged more than the bid price");
            expect_close(i, charged + refund, it->second.escrow, "fill escrow release");
            escrow_ -= it->second.escrow;
            bids_.erase(it);
            rx_ += charged - fee;
            ry_ -= 1.0;
            fees_pot_ += fee;
            x_out_ += refund;
            y_out_units_ += 1.0;
            check_curve(i);
        } else if (e.kind == "clearing_fill" || e.kind == "residual_fill") {
            market_closed_ = true;
            apply_clearing(i, e);
        } else if (e.kind == "fee_credit") {
            fees_bal_[e.actor] += opt(e.x_amount);
        } else if (e.kind == "metric") {
            if (e.detail == "clearing_oracle") {
                oracle_greedy_ = opt(e.price);
                oracle_exact_ = opt(e.x_amount);
            } else {
                metric_share_sum_[e.time] += opt(e.share);
            }
        } else if (e.kind == "set_constant") {
            // takes effect at the next tick; nothing to track here
        } else {
            fail(i, "unknown event kind '" + e.kind + "'");
        }
    }

    void apply_clearing(std::size_t i, const TraceEvent& e) {
        const std::string& d = e.detail;
        if (d == "dutch" || d == "match" || d == "fill") {
            auto it = bids_.find(e.ref);
            if (it == bids_.end()) {
                fail(i, "clearing fill of unknown bid " + e.ref);
                return;
            }
            double price = opt(e.price);
            expect(i, price <= it->second.price + kTol,
                   "clearing charged more than the bid price");
            it->second.escrow -= price;
            escrow_ -= price;
            ry_ -= 1.0;
            y_out_units_ += 1.0;
            if (it->second.escrow <= kTol) bids_.erase(it);
            if (d == "match") {
                x_out_ += price;  // paid straight to the unit's owner
            } else {
                clearing_pot_ += price;
            }
            if (d == "dutch") {
                expect(i, price <= last_dutch_fill_ + kTol,
                       "dutch fills must be nonincreasing");
                last_dutch_fill_ = price;
                dutch_fill_total_ += price;
            }
        } else if (d == "payout") {
            double amount = opt(e.x_amount);
            clearing_pot_ -= amount;
            x_out_ += amount;
            provider_clearing_payout_[e.actor] += amount;
        } else if (d == "excess" || d == "refund") {
            auto it = bids_.find(e.ref);
            double amount = opt(e.x_amount);
            if (it == bids_.end()) {
                fail(i, "refund of unknown bid " + e.ref);
                return;
            }
            if (d == "refund")
                expect_close(i, amount, it->second.escrow, "unfilled refund returns escrow");
            it->second.escrow -= amount;
            escrow_ -= amount;
            x_out_ += amount;
            if (it->second.escrow <= kTol) bids_.erase(it);
        } else {
            fail(i, "unknown clearing detail '" + d + "'");
        }
    }

    void check_conservation(std::size_t i) {
        double holdings = rx_ + escrow_ + fees_pot_ + clearing_pot_;
        double external = x_in_ - x_out_;
        double scale = std::max(1.0, x_in_);
        ++report_.checks_run;
        if (std::abs(holdings - external) > kTol * scale)
            fail(i, "X conservation broken: holdings " + std::to_string(holdings) +
                        " vs net inflow " + std::to_string(external));
    }

    void finish() {
        std::size_t end = SIZE_MAX;
        expect(end, std::abs(escrow_) <= kTol * std::max(1.0, x_in_),
               "escrow not fully settled at end of trace");
        expect(end, std::abs(clearing_pot_) <= kTol * std::max(1.0, x_in_),
               "clearing pot not fully paid out");
        expect(end, std::abs(rx_) <= kTol * std::max(1.0, x_in_) &&
                        std::abs(ry_) <= kTol * std::max(1.0, y_in_),
               "reserves not emptied by retrieval");
        expect_close(end, y_in_ + y_in_units_, y_out_ + y_out_units_, "Y conservation");

        for (const auto& [t, sum] : metric_share_sum_) {
            ++report_.checks_run;
            if (std::abs(sum - 1.0) > 1e-12)
                fail(end, "shares at t=" + std::to_string(t) + " sum to " +
                              std::to_string(sum));
        }

        // replay closure against the engine's final summary
        if (!retrieval_seen_ && final_.halted_early) {
            expect(end, shares_.empty(), "halted run left providers in the replay");
        } else if (retrieval_seen_) {
            expect_close(end, pre_retrieval_.x, final_.pre_retrieval_reserves.x,
                         "replayed reserve x");
            expect_close(end, pre_retrieval_.y, final_.pre_retrieval_reserves.y,
                         "replayed reserve y");
            for (const auto& [id, s] : final_.shares) {
                auto it = pre_shares_.find(id);
                if (it == pre_shares_.end())
                    fail(end, "provider " + id + " missing from replayed shares");
                else
                    expect_close(end, it->second, s, "replayed share of " + id);
            }
            for (const auto& [id, f] : final_.fees) {
                auto it = pre_fees_.find(id);
                if (it == pre_fees_.end())
                    fail(end, "provider " + id + " missing from replayed fees");
                else
                    expect_close(end, it->second, f, "replayed fees of " + id);
            }
            if (!final_.halted_early)
                expect_close(end, last_aggregate_, final_.aggregate_c,
                             "replayed aggregate constant");
        } else {
            fail(end, "trace has no retrieval exits (incomplete run)");
        }

        // market clearance: no leftover unit a refunded (floor-clearing) bid wanted
        for (const auto& u : final_.leftover_units)
            for (const auto& b : final_.unfilled_bids) {
                ++report_.checks_run;
                if (b.price >= sc_.floor && u.ask <= b.price)
                    fail(end, "uncleared pair: unit " + u.unit_id + " ask " +
                                  std::to_string(u.ask) + " <= bid " + b.id + " price " +
                                  std::to_string(b.price));
            }

        // payout events must reconcile with the clearing report
        for (const auto& [id, total] : final_.clearing.payouts) {
            auto it = provider_clearing_payout_.find(id);
            expect_close(end, it == provider_clearing_payout_.end() ? 0.0 : it->second,
                         total, "clearing payout events for " + id);
        }

        // mechanism-specific checks
        if (final_.clearing.mechanism == "dutch") {
            for (const auto& [id, payout] : final_.clearing.payouts) {
                auto it = final_.shares.find(id);
                double share = it == final_.shares.end() ? 0.0 : it->second;
                expect_close(end, payout, share * dutch_fill_total_,
                             "dutch payout of " + id);
            }
        } else {
            expect(end,
                   final_.clearing.greedy_iterations <=
                       final_.clearing.snapshot_units + final_.clearing.snapshot_bids,
                   "greedy iteration count exceeds |U| + |B|");
            if (oracle_exact_ >= 0.0) {
                ++report_.checks_run;
                if (oracle_greedy_ < 0.5 * oracle_exact_ - kTol)
                    fail(end, "greedy weight below half the exact optimum");
            }
        }
    }

    const std::vector<TraceEvent>& trace_;
    const FinalSummary& final_;
    const Scenario& sc_;
    VerifyReport report_;

    double rx_ = 0.0, ry_ = 0.0;
    double escrow_ = 0.0, fees_pot_ = 0.0, clearing_pot_ = 0.0;
    double x_in_ = 0.0, x_out_ = 0.0;
    double y_in_ = 0.0, y_out_ = 0.0;            // reserve-level Y flows
    double y_in_units_ = 0.0, y_out_units_ = 0.0;  // trader-held units
    double anchor_c_ = 0.0, anchor_k_ = 0.0;
    double last_aggregate_ = 0.0;
    bool market_closed_ = false;
    bool retrieval_seen_ = false;
    double last_dutch_fill_ = std::numeric_limits<double>::infinity();
    double dutch_fill_total_ = 0.0;
    double oracle_greedy_ = -1.0, oracle_exact_ = -1.0;
    PoolState pre_retrieval_;
    std::map<std::string, double> shares_, pre_shares_;
    std::map<std::string, double> fees_bal_, pre_fees_;
    std::map<std::string, BidState> bids_;
    std::map<Tick, double> metric_share_sum_;
    std::map<std::string, double> provider_clearing_payout_;
};

}  // namespace detail

// Checks every module invariant a finished trace must satisfy. Failures carry
// the index of the offending event.
inline VerifyReport check_trace(const std::vector<TraceEvent>& trace,
                                const FinalSummary& final_state, const Scenario& sc) {
    return detail::TraceChecker(trace, final_state, sc).run();
}

// Runs the scenario twice (determinism), then replays and checks the trace.
inline std::pair<RunResult, VerifyReport> verify(const Scenario& sc) {
    RunResult first = run(sc);
    RunResult second = run(sc);
    VerifyReport report = check_trace(first.trace, first.final_state, sc);
    ++report.checks_run;
    if (first.trace.size() != second.trace.size()) {
        report.failures.push_back({SIZE_MAX, "rerun produced a different event count"});
    } else {
        for (std::size_t i = 0; i < first.trace.size(); ++i) {
            if (trace_line(first.trace[i]) != trace_line(second.trace[i])) {
                report.failures.push_back(
                    {i, "rerun diverged (determinism broken) at event " + std::to_string(i)});
                break;
            }
        }
    }
    return {std::move(first), std::move(report)};
}

}  // namespace pamm

#endif
