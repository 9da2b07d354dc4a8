#ifndef PAMM_BELIEFS_HPP
#define PAMM_BELIEFS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pamm/errors.hpp"

namespace pamm {

enum class BeliefFamily {
    log_normal,  // positive support, closed-form aggregates
    point_mass,  // degenerate at c_star
};

// Probabilistic model of provider beliefs: each provider draws their constant
// iid from a distribution with mean c_star, and the market aggregates them by
// the share-weighted geometric mean.
struct BeliefModel {
    BeliefFamily family = BeliefFamily::log_normal;
    double c_star = 3.0;
    double sigma = 0.25;  // log-space spread for the log-normal family
    std::vector<double> shares;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(c_star > 0.0))
            throw ValidationError("beliefs: c_star must be positive");
        if (!(sigma >= 0.0))
            throw ValidationError("beliefs: sigma must be nonnegative");
        if (shares.empty())
            throw ValidationError("beliefs: need at least one share");
        double sum = 0.0;
        for (double s : shares) {
            if (!(s >= 0.0)) throw ValidationError("beliefs: shares must be nonnegative");
            sum += s;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("beliefs: shares must sum to 1");
    }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller, spelled out so the draw sequence is fixed by this code alone.
inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// One aggregate draw: c = prod c_l^{s_l} with each c_l iid from the base
// distribution (log-normal parameterized so E[c_l] = c_star).
inline double draw_aggregate(const BeliefModel& m, std::mt19937_64& rng) {
    if (m.family == BeliefFamily::point_mass) return m.c_star;
    double mu = std::log(m.c_star) - 0.5 * m.sigma * m.sigma;
    double log_c = 0.0;
    for (double s : m.shares) log_c += s * (mu + m.sigma * normal01(rng));
    return std::exp(log_c);
}

}  // namespace detail

struct SampleStats {
    std::vector<double> samples;
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean

    static SampleStats of(std::vector<double> xs) {
        SampleStats st;
        st.samples = std::move(xs);
        double n = static_cast<double>(st.samples.size());
        for (double v : st.samples) st.mean += v;
        st.mean /= n;
        double var = 0.0;
        for (double v : st.samples) var += (v - st.mean) * (v - st.mean);
        if (st.samples.size() > 1) var /= (n - 1.0);
        st.se = std::sqrt(var / n);
        return st;
    }
};

inline SampleStats sample_aggregate(const BeliefModel& model, std::size_t replicas) {
    model.validate();
    if (replicas < 1)
        throw DomainError("sample_aggregate: need at least one replica");
    std::mt19937_64 rng(model.seed);
    std::vector<double> cs(replicas);
    for (auto& c : cs) c = detail::draw_aggregate(model, rng);
    return SampleStats::of(std::move(cs));
}

// Misreport aggregate d_{l,a} = a^{s_l} * c, coupled to the honest samples:
// the same seed yields the same base draws, scaled element-wise.
inline SampleStats misreport_aggregate(const BeliefModel& model, std::size_t provider_index,
                                       double a, std::size_t replicas) {
    model.validate();
    if (provider_index >= model.shares.size())
        throw DomainError("misreport_aggregate: provider index out of range");
    if (!(a > 0.0))
        throw DomainError("misreport_aggregate: scale must be positive");
    double factor = std::pow(a, model.shares[provider_index]);
    std::mt19937_64 rng(model.seed);
    std::vector<double> ds(replicas);
    for (auto& d : ds) d = factor * detail::draw_aggregate(model, rng);
    return SampleStats::of(std::move(ds));
}

struct DensityReport {
    std::size_t bins = 0;
    double max_discrepancy = 0.0;       // sup over bins of |observed - predicted| density
    std::vector<double> observed;       // histogram densities of the misreport samples
    std::vector<double> predicted;      // densities implied by g_a(x) = a^{-s} f(a^{-s} x)
};

// Checks the density transform of the misreport aggregate: the mass of d in a
// bin must match the mass of c in the bin mapped through x -> a^{-s_l} x.
inline DensityReport density_transform_check(const BeliefModel& model,
                                             std::size_t provider_index, double a,
                                             std::size_t bins, std::size_t replicas) {
    if (replicas < 100000)
        throw DomainError("density_transform_check: need at least 1e5 replicas");
    if (bins < 1)
        throw DomainError("density_transform_check: need at least one bin");
    SampleStats c_stats = sample_aggregate(model, replicas);
    SampleStats d_stats = misreport_aggregate(model, provider_index, a, replicas);
    const auto& cs = c_stats.samples;
    const auto& ds = d_stats.samples;

    double lo = *std::min_element(ds.begin(), ds.end());
    double hi = *std::max_element(ds.begin(), ds.end());
    if (hi <= lo) hi = lo + 1.0;  // point-mass beliefs: one degenerate bin
    hi += (hi - lo) * 1e-9;       // keep the max sample inside the last bin

    double inv_scale = std::pow(a, -model.shares[provider_index]);
    double width = (hi - lo) / static_cast<double>(bins);
    double n = static_cast<double>(replicas);

    DensityReport report;
    report.bins = bins;
    report.observed.resize(bins, 0.0);
    report.predicted.resize(bins, 0.0);
    for (double d : ds) {
        auto bin = static_cast<std::size_t>((d - lo) / width);
        if (bin >= bins) bin = bins - 1;
        report.observed[bin] += 1.0;
    }
    double edge_slack = (hi - lo) * 1e-12;
    for (double c : cs) {
        // locate the d-bin whose preimage [a^{-s} e_i, a^{-s} e_{i+1}) holds c
        double mapped = c / inv_scale;
        if (mapped < lo - edge_slack || mapped >= hi + edge_slack) continue;
        mapped = std::clamp(mapped, lo, hi);
        auto bin = static_cast<std::size_t>((mapped - lo) / width);
        if (bin >= bins) bin = bins - 1;
        report.predicted[bin] += 1.0;
    }
    for (std::size_t i = 0; i < bins; ++i) {
        report.observed[i] /= n * width;
        report.predicted[i] /= n * width;
        report.max_discrepancy =
            std::max(report.max_discrepancy, std::abs(report.observed[i] - report.predicted[i]));
    }
    return report;
}

// The unknown absolute profit function r: continuous, maximized only at
// c_star, strictly decreasing in |c - c_star|, vanishing at 0+ and infinity.
struct ProfitFunction {
    std::function<double(double)> evaluator;

    double operator()(double c) const { return evaluator(c); }

    // r(x) = exp(-(ln x - ln c_star)^2), the harness default.
    static ProfitFunction peaked_log_gaussian(double c_star) {
        double log_c = std::log(c_star);
        return ProfitFunction{[log_c](double x) {
            double d = std::log(x) - log_c;
            return std::exp(-d * d);
        }};
    }
};

// Sampling validation of the ProfitFunction contract.
inline bool validate_profit_function(const ProfitFunction& r, double c_star,
                                     int samples = 512) {
    double peak = r(c_star);
    double prev_up = peak, prev_down = peak;
    for (int i = 1; i <= samples; ++i) {
        double factor = std::pow(1.02, i);
        double up = r(c_star * factor);
        double down = r(c_star / factor);
        if (up >= prev_up || down >= prev_down) return false;
        prev_up = up;
        prev_down = down;
    }
    return prev_up < 1e-3 * peak && prev_down < 1e-3 * peak;
}

struct HonestyRow {
    double a = 1.0;
    double mean_honest = 0.0;
    double mean_misreport = 0.0;
    double se_honest = 0.0;
    double se_misreport = 0.0;
    bool flagged = false;  // honest mean beats misreport by >= 3 paired SEs
};

// For each scale a, compares expected profit under honest reporting against
// the coupled misreport d = a^{s_l} * c. The flag uses the paired standard
// error, which the coupling makes tight.
inline std::vector<HonestyRow> honesty_experiment(const BeliefModel& model,
                                                  const ProfitFunction& profit,
                                                  std::size_t provider_index,
                                                  const std::vector<double>& a_grid,
                                                  std::size_t replicas) {
    if (replicas < 100000)
        throw DomainError("honesty_experiment: need at least 1e5 replicas");
    SampleStats honest = sample_aggregate(model, replicas);
    std::vector<double> r_honest(replicas);
    for (std::size_t i = 0; i < replicas; ++i) r_honest[i] = profit(honest.samples[i]);
    SampleStats r_honest_stats = SampleStats::of(r_honest);

    std::vector<HonestyRow> rows;
    for (double a : a_grid) {
        double factor = std::pow(a, model.shares[provider_index]);
        std::vector<double> r_mis(replicas), diff(replicas);
        for (std::size_t i = 0; i < replicas; ++i) {
            r_mis[i] = profit(factor * honest.samples[i]);
            diff[i] = r_honest_stats.samples[i] - r_mis[i];
        }
        SampleStats mis_stats = SampleStats::of(std::move(r_mis));
        SampleStats diff_stats = SampleStats::of(std::move(diff));

        HonestyRow row;
        row.a = a;
        row.mean_honest = r_honest_stats.mean;
        row.mean_misreport = mis_stats.mean;
        row.se_honest = r_honest_stats.se;
        row.se_misreport = mis_stats.se;
        double gap = row.mean_honest - row.mean_misreport;
        row.flagged = diff_stats.se > 0.0 ? gap >= 3.0 * diff_stats.se : gap > 0.0;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pamm

#endif
