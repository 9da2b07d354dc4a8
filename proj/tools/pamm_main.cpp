// pamm command line: run scenarios, verify invariants, summarize traces,
// drive belief experiments, and benchmark the greedy clearing approximation.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "pamm/pamm.hpp"

namespace fs = std::filesystem;

namespace {

pamm::Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pamm::ParseError("cannot open scenario file " + path);
    return pamm::load_scenario(in);
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
    auto sc = load_scenario_file(path);
    if (seed) sc.seed = *seed;
    auto result = pamm::run(sc);

    fs::create_directories(out_dir);
    fs::path trace_path = fs::path(out_dir) / "trace.csv";
    std::ofstream trace_out(trace_path, std::ios::binary);
    pamm::write_trace(trace_out, result.trace);
    trace_out.close();

    auto summary = pamm::summarize(result.trace);
    fs::path summary_path = fs::path(out_dir) / "summary.txt";
    std::ofstream summary_out(summary_path, std::ios::binary);
    summary_out << summary.to_text();
    summary_out.close();

    std::cout << summary.to_text();
    std::cout << "trace: " << trace_path.string() << "\n";
    std::cout << "summary: " << summary_path.string() << "\n";
    return 0;
}

int cmd_verify(const std::string& path) {
    auto sc = load_scenario_file(path);
    auto [result, report] = pamm::verify(sc);
    std::cout << report.to_text();
    return report.ok() ? 0 : 1;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pamm::ParseError("cannot open trace file " + path);
    auto trace = pamm::read_trace(in);
    std::cout << pamm::summarize(trace).to_text();
    return 0;
}

int cmd_beliefs(const std::string& path, const std::string& out_dir) {
    std::ifstream in(path);
    if (!in) throw pamm::ParseError("cannot open experiment file " + path);
    auto ex = pamm::load_experiment(in);
    auto res = pamm::run_experiment(ex);

    fs::create_directories(out_dir);
    fs::path csv_path = fs::path(out_dir) / "honesty.csv";
    std::ofstream csv(csv_path, std::ios::binary);
    pamm::write_honesty_csv(csv, res.rows);
    csv.close();

    std::cout << pamm::experiment_text(ex, res);
    std::cout << "table: " << csv_path.string() << "\n";
    return 0;
}

int cmd_clearing_bench(int max_size, int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> side(0, max_size);
    std::uniform_int_distribution<int> price(1, 20);

    double worst_ratio = 1.0;
    double ratio_sum = 0.0;
    long long nontrivial = 0;
    bool work_bound_ok = true;
    for (int i = 0; i < instances; ++i) {
        std::vector<pamm::UnitListing> units(side(rng));
        std::vector<pamm::Bid> bids(side(rng));
        for (std::size_t u = 0; u < units.size(); ++u)
            units[u] = {"u" + std::to_string(u), "lp0", static_cast<double>(price(rng))};
        for (std::size_t b = 0; b < bids.size(); ++b) {
            bids[b].id = "b" + std::to_string(b);
            bids[b].price = price(rng);
            bids[b].escrow = bids[b].price;
            bids[b].seq = b;
        }
        auto greedy = pamm::greedy_matching(units, bids);
        auto graph = pamm::build_auction_graph(units, bids);
        auto mode = units.size() + bids.size() <= 16 ? pamm::ExactMode::exhaustive
                                                     : pamm::ExactMode::augmenting;
        double exact = pamm::exact_max_weight_matching(graph, mode).weight();
        if (greedy.iterations > static_cast<long long>(units.size() + bids.size()))
            work_bound_ok = false;
        if (exact > 0.0) {
            double ratio = greedy.matching.weight() / exact;
            worst_ratio = std::min(worst_ratio, ratio);
            ratio_sum += ratio;
            ++nontrivial;
        }
    }
    std::cout << "clearing-bench: " << instances << " instances, max side " << max_size
              << "\n";
    std::cout << "worst greedy/exact ratio: " << worst_ratio << "\n";
    if (nontrivial > 0)
        std::cout << "mean greedy/exact ratio:  "
                  << ratio_sum / static_cast<double>(nontrivial) << " over " << nontrivial
                  << " nontrivial instances\n";
    std::cout << "work bound |U|+|B|: " << (work_bound_ok ? "held" : "VIOLATED") << "\n";
    bool ok = worst_ratio >= 0.5 && work_bound_ok;
    std::cout << (ok ? "OK" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"perishable-asset market maker simulator"};
    app.require_subcommand(1);

    std::string scenario_path, trace_path, experiment_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    int bench_max_size = 8;
    int bench_instances = 10000;
    std::uint64_t bench_seed = 1;

    auto* run_cmd = app.add_subcommand("run", "run a scenario, write trace and summary");
    run_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run_cmd->add_option("--seed", seed_override, "override the scenario seed");
    run_cmd->add_option("--out", out_dir, "output directory (default .)");

    auto* verify_cmd =
        app.add_subcommand("verify", "run a scenario and check every invariant");
    verify_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* report_cmd = app.add_subcommand("report", "summarize a trace CSV");
    report_cmd->add_option("trace", trace_path, "trace CSV file")->required();

    auto* beliefs_cmd =
        app.add_subcommand("beliefs", "run a belief-model experiment file");
    beliefs_cmd->add_option("experiment", experiment_path, "experiment JSON file")
        ->required();
    beliefs_cmd->add_option("--out", out_dir, "output directory (default .)");

    auto* bench_cmd = app.add_subcommand(
        "clearing-bench", "sweep greedy vs exact matching on random instances");
    bench_cmd->add_option("--max-size", bench_max_size, "max units/bids per side");
    bench_cmd->add_option("--instances", bench_instances, "number of random instances");
    bench_cmd->add_option("--seed", bench_seed, "sweep seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(scenario_path, seed_override, out_dir);
        if (verify_cmd->parsed()) return cmd_verify(scenario_path);
        if (report_cmd->parsed()) return cmd_report(trace_path);
        if (beliefs_cmd->parsed()) return cmd_beliefs(experiment_path, out_dir);
        if (bench_cmd->parsed())
            return cmd_clearing_bench(bench_max_size, bench_instances, bench_seed);
    } catch (const pamm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
