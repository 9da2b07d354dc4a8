#ifndef PAMM_REPORT_HPP
#define PAMM_REPORT_HPP

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pamm/errors.hpp"
#include "pamm/trace.hpp"

namespace pamm {

// Aggregate view of a finished run, computable from the trace alone.
struct Summary {
    std::size_t events = 0;
    double volume_buy_x = 0.0;   // gross X paid into the AMM (trades + book fills)
    double volume_sell_x = 0.0;  // net X paid out for sells
    long long units_bought = 0;
    long long units_sold_back = 0;
    double fees_total = 0.0;
    std::map<std::string, double> fees_by_provider;
    std::string mechanism = "none";
    long long clearing_fills = 0;
    double clearing_value = 0.0;
    long long residual_fills = 0;
    double refunds_total = 0.0;
    std::map<std::string, double> clearing_payouts;
    double greedy_weight = -1.0;
    double exact_weight = -1.0;
    std::map<std::string, double> final_dl;
    std::map<std::string, double> final_order_loss;
    double unmatched_y = 0.0;  // Y returned unsold at retrieval
    bool halted_early = false;

    std::string to_text() const {
        std::ostringstream os;
        auto num = [](double v) { return detail::format_double(v); };
        os << "pamm run summary (schema 1)\n";
        os << "events: " << events << "\n";
        os << "volume_buy_x: " << num(volume_buy_x) << "\n";
        os << "volume_sell_x: " << num(volume_sell_x) << "\n";
        os << "units_bought: " << units_bought << "\n";
        os << "units_sold_back: " << units_sold_back << "\n";
        os << "fees_total: " << num(fees_total) << "\n";
        for (const auto& [id, v] : fees_by_provider)
            os << "fees[" << id << "]: " << num(v) << "\n";
        os << "clearing_mechanism: " << mechanism << "\n";
        os << "clearing_fills: " << clearing_fills << "\n";
        os << "clearing_value_x: " << num(clearing_value) << "\n";
        os << "residual_fills: " << residual_fills << "\n";
        os << "refunds_total_x: " << num(refunds_total) << "\n";
        for (const auto& [id, v] : clearing_payouts)
            os << "clearing_payout[" << id << "]: " << num(v) << "\n";
        if (greedy_weight >= 0.0) os << "greedy_weight: " << num(greedy_weight) << "\n";
        if (exact_weight >= 0.0) {
            os << "exact_weight: " << num(exact_weight) << "\n";
            os << "greedy_exact_ratio: "
               << num(exact_weight > 0.0 ? greedy_weight / exact_weight : 1.0) << "\n";
        }
        for (const auto& [id, v] : final_dl)
            os << "divergence_loss[" << id << "]: " << num(v) << "\n";
        for (const auto& [id, v] : final_order_loss)
            os << "order_loss[" << id << "]: " << num(v) << "\n";
        os << "unmatched_y_at_retrieval: " << num(unmatched_y) << "\n";
        os << "halted_early: " << (halted_early ? "true" : "false") << "\n";
        return os.str();
    }
};

// Aggregates a complete trace; a trace with no retrieval (or halt) exits is
// rejected as incomplete.
inline Summary summarize(const std::vector<TraceEvent>& trace) {
    Summary s;
    s.events = trace.size();
    bool saw_exit = false;
    bool saw_retrieval = false;
    double matched_value = 0.0;
    std::map<std::string, bool> provider_live;
    for (const auto& e : trace) {
        if (e.kind == "amm_trade") {
            if (e.detail == "buy") {
                s.volume_buy_x += e.price.value_or(0.0);
                s.units_bought += static_cast<long long>(e.units.value_or(0.0));
            } else {
                s.volume_sell_x += e.price.value_or(0.0);
                s.units_sold_back += static_cast<long long>(e.units.value_or(0.0));
            }
            s.fees_total += e.fee.value_or(0.0);
        } else if (e.kind == "bid_fill") {
            s.volume_buy_x += e.price.value_or(0.0);
            s.units_bought += 1;
            s.fees_total += e.fee.value_or(0.0);
        } else if (e.kind == "fee_credit") {
            s.fees_by_provider[e.actor] += e.x_amount.value_or(0.0);
        } else if (e.kind == "join") {
            provider_live[e.actor] = true;
        } else if (e.kind == "exit") {
            saw_exit = true;
            provider_live[e.actor] = false;
            if (e.detail == "retrieval") {
                saw_retrieval = true;
                s.unmatched_y += e.y_amount.value_or(0.0);
            }
        } else if (e.kind == "clearing_fill") {
            if (e.detail == "dutch" || e.detail == "match") {
                s.mechanism = e.detail == "dutch" ? "dutch" : "matching";
                ++s.clearing_fills;
                s.clearing_value += e.price.value_or(0.0);
                if (e.detail == "match") matched_value += e.price.value_or(0.0);
            } else if (e.detail == "payout") {
                s.clearing_payouts[e.actor] += e.x_amount.value_or(0.0);
            } else if (e.detail == "refund" || e.detail == "excess") {
                s.refunds_total += e.x_amount.value_or(0.0);
            }
        } else if (e.kind == "residual_fill") {
            if (e.detail == "fill") {
                ++s.residual_fills;
                s.clearing_value += e.price.value_or(0.0);
            } else if (e.detail == "payout") {
                s.clearing_payouts[e.actor] += e.x_amount.value_or(0.0);
            } else if (e.detail == "refund" || e.detail == "excess") {
                s.refunds_total += e.x_amount.value_or(0.0);
            }
        } else if (e.kind == "metric") {
            if (e.detail == "clearing_oracle") {
                s.greedy_weight = e.price.value_or(-1.0);
                s.exact_weight = e.x_amount.value_or(-1.0);
            } else {
                if (e.dl) s.final_dl[e.actor] = *e.dl;
                if (e.order_loss) s.final_order_loss[e.actor] = *e.order_loss;
            }
        }
    }
    if (s.mechanism == "matching" && s.greedy_weight < 0.0) s.greedy_weight = matched_value;
    if (!saw_exit)
        throw IncompleteTraceError("summarize: trace has no exit events");
    if (!saw_retrieval) {
        bool any_live = false;
        for (const auto& [id, live] : provider_live) any_live = any_live || live;
        if (any_live)
            throw IncompleteTraceError("summarize: trace ends before retrieval");
        s.halted_early = true;
    }
    return s;
}

}  // namespace pamm

#endif
