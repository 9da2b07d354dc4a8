#ifndef PAMM_LOSS_HPP
#define PAMM_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pamm/curve.hpp"
#include "pamm/errors.hpp"

namespace pamm {

// Everything a provider's loss metrics need from the moment they joined:
// share, liquidity state, aggregate constant, spot price, and the frozen
// order prices.
struct LossSnapshot {
    double share0 = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    double c0 = 0.0;
    double price0 = 0.0;          // c0 * y0 / x0
    std::vector<double> orders0;  // bid prices frozen at join time

    static LossSnapshot make(double share0, double x0, double y0, double c0,
                             std::vector<double> orders0 = {}) {
        if (!(x0 > 0.0) || !(y0 > 0.0) || !(c0 > 0.0))
            throw DomainError("loss snapshot: state and constant must be positive");
        return LossSnapshot{share0, x0, y0, c0, c0 * y0 / x0, std::move(orders0)};
    }
};

// DL = s * (x + p*y) - s0 * (x0 + p0*y0) with p = c*y/x; negative means loss.
inline double divergence_loss(const LossSnapshot& snap, double share,
                              const PoolState& state, double c) {
    if (!(state.x > 0.0) || !(state.y > 0.0))
        throw DomainError("divergence_loss: state must be positive");
    double p = c * state.y / state.x;
    return share * (state.x + p * state.y) - snap.share0 * (snap.x0 + snap.price0 * snap.y0);
}

// d(DL)/d(c_own) = y^2 * s^2 * c / (x * c_own), the marginal effect of a
// provider's own constant on their divergence loss.
inline double dl_sensitivity(double share, double c_own, double c_aggregate,
                             const PoolState& state) {
    if (!(share > 0.0) || !(c_own > 0.0) || !(c_aggregate > 0.0) || !(state.x > 0.0) ||
        !(state.y > 0.0))
        throw DomainError("dl_sensitivity: all arguments must be positive");
    return state.y * state.y * share * share * c_aggregate / (state.x * c_own);
}

// Largest price p' <= price(o) among the other orders; the order's own price
// when no other order is that cheap. Duplicate prices count.
inline double second_price(std::size_t index, const std::vector<double>& prices) {
    if (index >= prices.size())
        throw MembershipError("second_price: order not in the set");
    double p = prices[index];
    double best = -1.0;
    bool found = false;
    for (std::size_t j = 0; j < prices.size(); ++j) {
        if (j == index) continue;
        if (prices[j] <= p && (!found || prices[j] > best)) {
            best = prices[j];
            found = true;
        }
    }
    return found ? best : p;
}

// minProfit(x, y; O) = x + max over subsets of size <= floor(y) of the summed
// second prices. Second prices are fixed per order, so the maximum is the
// top-k sum.
inline double min_profit(double x, double y, const std::vector<double>& prices) {
    std::vector<double> seconds(prices.size());
    for (std::size_t i = 0; i < prices.size(); ++i) seconds[i] = second_price(i, prices);
    std::sort(seconds.begin(), seconds.end(), std::greater<double>());
    std::size_t cap = 0;
    if (y >= 1.0)
        cap = std::min(static_cast<std::size_t>(std::floor(y)), seconds.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < cap; ++i) sum += seconds[i];
    return x + sum;
}

// orderLoss = s0 * minProfit(x0, y0; O0) - s * minProfit(x, y; O);
// negative means the provider expects a profit.
inline double order_loss(const LossSnapshot& snap, double share, const PoolState& state,
                         const std::vector<double>& prices) {
    return snap.share0 * min_profit(snap.x0, snap.y0, snap.orders0) -
           share * min_profit(state.x, state.y, prices);
}

}  // namespace pamm

#endif
