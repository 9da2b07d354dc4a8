#ifndef PAMM_POOL_HPP
#define PAMM_POOL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pamm/curve.hpp"
#include "pamm/errors.hpp"

namespace pamm {

using Tick = std::int64_t;

// State recorded the moment a provider joins, for loss accounting.
struct JoinSnapshot {
    double x0 = 0.0;
    double y0 = 0.0;
    double c0 = 0.0;
    double share0 = 0.0;
    double price0 = 0.0;
};

struct LiquidityProvider {
    std::string id;
    double share = 0.0;     // s_l, in [0, 1]
    double constant = 1.0;  // c_l, in [a, b]
    JoinSnapshot join_snapshot;
    double fees_accrued = 0.0;  // units of X, held outside reserves
    double unit_ask = 0.0;      // ask attached to this provider's units at clearing
};

// Uniformly spaced update times T, followed by clearing and retrieval.
struct EpochSchedule {
    std::vector<Tick> times;
    Tick clearing_time = 0;
    Tick retrieval_time = 0;

    void validate() const {
        if (times.empty())
            throw ValidationError("schedule: need at least one epoch time");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (times[i] <= times[i - 1])
                throw ValidationError("schedule: epoch times must be strictly increasing");
            if (times[i] - times[i - 1] != times[1] - times[0])
                throw ValidationError("schedule: epoch times must be uniformly spaced");
        }
        if (!(times.back() < clearing_time && clearing_time < retrieval_time))
            throw ValidationError("schedule: require max(T) < clearing < retrieval");
    }

    bool is_epoch(Tick t) const {
        for (Tick e : times)
            if (e == t) return true;
        return false;
    }

    static EpochSchedule uniform(int count, Tick stride) {
        EpochSchedule s;
        for (int i = 1; i <= count; ++i) s.times.push_back(stride * i);
        s.clearing_time = s.times.back() + stride;
        s.retrieval_time = s.clearing_time + 1;
        return s;
    }
};

// Share-weighted geometric mean of the providers' constants: c = prod c_l^{s_l}.
inline double aggregate_constant(const std::map<std::string, LiquidityProvider>& providers) {
    if (providers.empty())
        throw EmptyPoolError("aggregate_constant: no providers");
    double log_sum = 0.0;
    for (const auto& [id, lp] : providers)
        log_sum += lp.share * std::log(lp.constant);
    return std::exp(log_sum);
}

// The liquidity pool: reserves pinned to the active state curve, a provider
// registry whose shares always sum to 1, and fee balances held off-curve.
class Pool {
public:
    struct TradeResult {
        double gross = 0.0;    // X paid by (buy) or owed to (sell) the trader, pre-fee
        double curve_x = 0.0;  // X amount that actually moves the reserves
        double fee = 0.0;      // withheld and credited to providers
    };

    struct ExitPayout {
        double x = 0.0;
        double y = 0.0;
        double fees = 0.0;
    };

    Pool(PoolState initial, const std::string& founder_id, double founder_constant,
         Bounds bounds, EpochSchedule schedule, double fee_rate, double founder_ask = 0.0)
        : bounds_(bounds), schedule_(std::move(schedule)), fee_rate_(fee_rate) {
        bounds_.validate();
        schedule_.validate();
        if (!(fee_rate_ >= 0.0 && fee_rate_ < 1.0))
            throw ValidationError("pool: fee_rate must be in [0, 1)");
        if (!bounds_.contains(founder_constant))
            throw BoundsError("pool: founder constant outside [a, b]");
        state_ = initial;
        curve_ = CurveParams::make(founder_constant, initial.x, initial.y);
        LiquidityProvider lp;
        lp.id = founder_id;
        lp.share = 1.0;
        lp.constant = founder_constant;
        lp.unit_ask = founder_ask;
        lp.join_snapshot = {initial.x, initial.y, founder_constant, 1.0,
                            spot_price(curve_, initial.x)};
        providers_.emplace(founder_id, std::move(lp));
    }

    const PoolState& state() const { return state_; }
    const CurveParams& curve() const { return curve_; }
    const Bounds& bounds() const { return bounds_; }
    const EpochSchedule& schedule() const { return schedule_; }
    double fee_rate() const { return fee_rate_; }
    Tick clock() const { return clock_; }
    bool halted() const { return halted_; }
    const std::map<std::string, LiquidityProvider>& providers() const { return providers_; }

    void set_clock(Tick t) { clock_ = t; }

    const LiquidityProvider& provider(const std::string& id) const {
        auto it = providers_.find(id);
        if (it == providers_.end())
            throw UnknownProviderError("pool: no provider " + id);
        return it->second;
    }

    // Proportional join: deposit_y = deposit_x * y / x keeps the reserve ratio
    // (and hence the spot price) unchanged; new share is deposit_x / (x + deposit_x).
    void join(const std::string& id, double deposit_x, double c_new, Tick at,
              double unit_ask = 0.0) {
        require_open();
        require_epoch(at);
        if (!bounds_.contains(c_new))
            throw BoundsError("join: constant outside [a, b]");
        if (!(deposit_x > 0.0))
            throw DomainError("join: deposit must be positive");
        if (providers_.count(id))
            throw ValidationError("join: provider " + id + " already present");

        double deposit_y = deposit_x * state_.y / state_.x;
        double scale = state_.x / (state_.x + deposit_x);
        for (auto& [pid, lp] : providers_) lp.share *= scale;
        LiquidityProvider lp;
        lp.id = id;
        lp.share = deposit_x / (state_.x + deposit_x);
        lp.constant = c_new;
        lp.unit_ask = unit_ask;
        providers_.emplace(id, lp);

        state_ = PoolState{state_.x + deposit_x, state_.y + deposit_y};
        rebase_at_state();
        auto& stored = providers_.at(id);
        stored.join_snapshot = {state_.x, state_.y, curve_.c, stored.share,
                                spot_price(curve_, state_.x)};
    }

    // Takes effect at this epoch's tick.
    void update_constant(const std::string& id, double c_new, Tick at) {
        require_open();
        require_epoch(at);
        if (!bounds_.contains(c_new))
            throw BoundsError("update_constant: constant outside [a, b]");
        auto it = providers_.find(id);
        if (it == providers_.end())
            throw UnknownProviderError("update_constant: no provider " + id);
        it->second.constant = c_new;
    }

    void set_unit_ask(const std::string& id, double ask) {
        auto it = providers_.find(id);
        if (it == providers_.end())
            throw UnknownProviderError("set_unit_ask: no provider " + id);
        if (!(ask >= 0.0))
            throw DomainError("set_unit_ask: ask must be nonnegative");
        it->second.unit_ask = ask;
    }

    // Recomputes the aggregate constant and rebases the curve at the current state.
    void epoch_tick(Tick at) {
        require_open();
        require_epoch(at);
        rebase_at_state();
    }

    // Credits fee_rate * trade_x to providers by share; reserves are untouched.
    double accrue_and_distribute_fees(double trade_x) {
        double fee = fee_rate_ * trade_x;
        for (auto& [id, lp] : providers_) lp.fees_accrued += lp.share * fee;
        return fee;
    }

    ExitPayout remove_liquidity(const std::string& id, Tick at) {
        require_open();
        require_epoch(at);
        auto it = providers_.find(id);
        if (it == providers_.end())
            throw UnknownProviderError("remove_liquidity: no provider " + id);

        ExitPayout out{it->second.share * state_.x, it->second.share * state_.y,
                       it->second.fees_accrued};
        state_ = PoolState{state_.x - out.x, state_.y - out.y};
        providers_.erase(it);

        if (providers_.empty()) {
            halted_ = true;
            state_ = PoolState{0.0, 0.0};
            return out;
        }
        double remaining = 0.0;
        for (const auto& [pid, lp] : providers_) remaining += lp.share;
        for (auto& [pid, lp] : providers_) lp.share /= remaining;
        rebase_at_state();
        return out;
    }

    // Whether the curve can sell one more whole unit (trades never drain Y).
    bool has_unit_inventory() const { return !market_closed() && state_.y > 1.0; }

    // Gross X cost of the next unit, fee included; this is what a buyer pays.
    double unit_buy_cost_gross() const {
        require_open();
        double curve_x = cost_to_buy_units(curve_, state_, 1);
        return curve_x + buy_fee(curve_x);
    }

    TradeResult buy_units(long long n) {
        require_open();
        double curve_x = cost_to_buy_units(curve_, state_, n);
        double fee = buy_fee(curve_x);
        TradeResult r{curve_x + fee, curve_x, fee};
        state_ = state_after_buy(curve_, state_, n);
        distribute(fee);
        return r;
    }

    TradeResult sell_units(long long n) {
        require_open();
        double curve_x = proceeds_to_sell_units(curve_, state_, n);
        double fee = fee_rate_ * curve_x;
        TradeResult r{curve_x - fee, curve_x, fee};
        state_ = state_after_sell(curve_, state_, n);
        distribute(fee);
        return r;
    }

    // Ends curve trading ahead of the clearing phase.
    void close_market() { closed_ = true; }
    bool market_closed() const { return closed_ || halted_; }

    // Units sold at clearing leave the reserves off-curve; only valid once
    // the market is closed.
    void withdraw_units(double units) {
        if (!closed_)
            throw ValidationError("withdraw_units: market still open");
        if (units > state_.y + 1e-9)
            throw InsufficientInventoryError("withdraw_units: not enough Y");
        state_.y -= units;
    }

    // Final pro-rata retrieval: every provider takes their share of the
    // remaining reserves plus accrued fees; the pool empties and halts.
    std::vector<std::pair<std::string, ExitPayout>> retrieve_all() {
        std::vector<std::pair<std::string, ExitPayout>> payouts;
        for (const auto& [id, lp] : providers_)
            payouts.emplace_back(
                id, ExitPayout{lp.share * state_.x, lp.share * state_.y, lp.fees_accrued});
        providers_.clear();
        state_ = PoolState{0.0, 0.0};
        halted_ = true;
        return payouts;
    }

    // Relative residual of the reserves against the active curve; only
    // meaningful while trading is open.
    double curve_residual() const {
        if (market_closed()) return 0.0;
        return std::abs(surface(curve_, state_.x, state_.y)) / curve_.k;
    }

    double share_sum() const {
        double s = 0.0;
        for (const auto& [id, lp] : providers_) s += lp.share;
        return s;
    }

private:
    void require_open() const {
        if (halted_)
            throw EmptyPoolError("pool: trading halted (no providers)");
        if (closed_)
            throw MarketClosedError("pool: market closed for clearing");
    }

    void require_epoch(Tick at) const {
        if (!schedule_.is_epoch(at))
            throw NotAnEpochError("pool: " + std::to_string(at) + " is not an epoch time");
    }

    void rebase_at_state() {
        curve_ = rebase(aggregate_constant(providers_), state_, bounds_);
    }

    // Fee such that fee == fee_rate * (curve_x + fee): the buyer's payment is
    // grossed up so the reserves receive the curve-exact amount.
    double buy_fee(double curve_x) const {
        return curve_x * fee_rate_ / (1.0 - fee_rate_);
    }

    void distribute(double fee) {
        for (auto& [id, lp] : providers_) lp.fees_accrued += lp.share * fee;
    }

    PoolState state_;
    CurveParams curve_;
    Bounds bounds_;
    EpochSchedule schedule_;
    double fee_rate_ = 0.0;
    Tick clock_ = 0;
    bool halted_ = false;
    bool closed_ = false;
    std::map<std::string, LiquidityProvider> providers_;
};

}  // namespace pamm

#endif
