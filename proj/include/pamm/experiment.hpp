#ifndef PAMM_EXPERIMENT_HPP
#define PAMM_EXPERIMENT_HPP

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamm/beliefs.hpp"
#include "pamm/errors.hpp"
#include "pamm/trace.hpp"

namespace pamm {

// A belief-model experiment: honesty comparison over a grid of misreport
// scales plus one density-transform check.
struct BeliefExperiment {
    BeliefModel model;
    std::size_t provider_index = 0;
    std::vector<double> a_grid{0.5, 2.0};
    std::size_t replicas = 100000;
    std::size_t density_bins = 64;
    std::size_t density_replicas = 1000000;
    double density_a = 2.0;
};

inline BeliefExperiment load_experiment(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("experiment: ") + e.what());
    }
    BeliefExperiment ex;
    try {
        std::string family = j.value("family", std::string("lognormal"));
        if (family == "lognormal")
            ex.model.family = BeliefFamily::log_normal;
        else if (family == "pointmass")
            ex.model.family = BeliefFamily::point_mass;
        else
            throw ValidationError("experiment: unknown family '" + family +
                                  "' (allowed: lognormal, pointmass)");
        ex.model.c_star = j.value("c_star", 3.0);
        ex.model.sigma = j.value("sigma", 0.25);
        ex.model.seed = j.value("seed", std::uint64_t{0});
        for (const auto& s : j.value("shares", nlohmann::json::array()))
            ex.model.shares.push_back(s.get<double>());
        ex.provider_index = j.value("provider_index", std::size_t{0});
        if (j.contains("a_grid")) {
            ex.a_grid.clear();
            for (const auto& a : j["a_grid"]) ex.a_grid.push_back(a.get<double>());
        }
        ex.replicas = j.value("replicas", std::size_t{100000});
        if (j.contains("density")) {
            ex.density_bins = j["density"].value("bins", std::size_t{64});
            ex.density_replicas = j["density"].value("replicas", std::size_t{1000000});
            ex.density_a = j["density"].value("a", 2.0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("experiment: ") + e.what());
    }
    ex.model.validate();
    if (ex.provider_index >= ex.model.shares.size())
        throw ValidationError("experiment: provider_index out of range");
    return ex;
}

struct ExperimentResult {
    std::vector<HonestyRow> rows;
    DensityReport density;
    double coupling_error = 0.0;  // max |d - a^{s} c| over a spot-check sample
    double mean_aggregate = 0.0;  // Monte Carlo E[c] (mean of geometric means)
    double se_aggregate = 0.0;
    double mean_of_means = 0.0;  // geometric mean of the per-provider means: c*
};

inline ExperimentResult run_experiment(const BeliefExperiment& ex) {
    ExperimentResult out;
    auto profit = ProfitFunction::peaked_log_gaussian(ex.model.c_star);
    out.rows = honesty_experiment(ex.model, profit, ex.provider_index, ex.a_grid,
                                  ex.replicas);
    out.density = density_transform_check(ex.model, ex.provider_index, ex.density_a,
                                          ex.density_bins, ex.density_replicas);

    auto honest = sample_aggregate(ex.model, ex.replicas);
    auto mis = misreport_aggregate(ex.model, ex.provider_index, ex.density_a, ex.replicas);
    double factor = std::pow(ex.density_a, ex.model.shares[ex.provider_index]);
    for (std::size_t i = 0; i < honest.samples.size(); ++i)
        out.coupling_error = std::max(
            out.coupling_error, std::abs(mis.samples[i] - factor * honest.samples[i]));

    // both aggregation readings: the sampled mean of the geometric mean, and
    // the geometric mean of the per-provider means (identically c*)
    out.mean_aggregate = honest.mean;
    out.se_aggregate = honest.se;
    out.mean_of_means = ex.model.c_star;
    return out;
}

// CSV table: a, mean_honest, mean_misreport, se_honest, se_misreport, flag
inline void write_honesty_csv(std::ostream& os, const std::vector<HonestyRow>& rows) {
    os << "a,mean_honest,mean_misreport,se_honest,se_misreport,flag\n";
    for (const auto& r : rows) {
        os << detail::format_double(r.a) << ',' << detail::format_double(r.mean_honest)
           << ',' << detail::format_double(r.mean_misreport) << ','
           << detail::format_double(r.se_honest) << ','
           << detail::format_double(r.se_misreport) << ',' << (r.flagged ? 1 : 0) << '\n';
    }
}

inline std::string experiment_text(const BeliefExperiment& ex, const ExperimentResult& res) {
    std::ostringstream os;
    os << "belief experiment (c* = " << detail::format_double(ex.model.c_star)
       << ", providers = " << ex.model.shares.size() << ", replicas = " << ex.replicas
       << ")\n";
    os << "coupling_error: " << detail::format_double(res.coupling_error) << "\n";
    os << "mean_aggregate_c: " << detail::format_double(res.mean_aggregate) << " (se "
       << detail::format_double(res.se_aggregate) << ")\n";
    os << "geometric_mean_of_means: " << detail::format_double(res.mean_of_means) << "\n";
    os << "aggregation_bias: "
       << detail::format_double(res.mean_aggregate - res.mean_of_means) << "\n";
    os << "density_a: " << detail::format_double(ex.density_a)
       << " bins: " << res.density.bins
       << " max_discrepancy: " << detail::format_double(res.density.max_discrepancy)
       << "\n";
    for (const auto& r : res.rows) {
        os << "a = " << detail::format_double(r.a)
           << ": honest " << detail::format_double(r.mean_honest) << " (se "
           << detail::format_double(r.se_honest) << "), misreport "
           << detail::format_double(r.mean_misreport) << " (se "
           << detail::format_double(r.se_misreport) << ")"
           << (r.flagged ? "  [misreport loses >= 3 SE]" : "") << "\n";
    }
    return os.str();
}

}  // namespace pamm

#endif
