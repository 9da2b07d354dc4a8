#ifndef PAMM_SCENARIO_HPP
#define PAMM_SCENARIO_HPP

#include <cctype>
#include <cstdint>
#include <istream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamm/curve.hpp"
#include "pamm/errors.hpp"
#include "pamm/pool.hpp"

namespace pamm {

// One scripted step of an agent.
struct AgentAction {
    Tick time = 0;
    std::string op;  // bid raise buy sell join exit set_constant set_ask
    double price = 0.0;
    double deposit_x = 0.0;
    double constant = 0.0;
    double ask = 0.0;
    long long units = 1;
    bool hidden = false;
};

// Draws a valuation when a stochastic policy fires.
struct ValuationSpec {
    std::string dist = "lognormal";  // lognormal | uniform
    double mean = 1.0;               // lognormal: arithmetic mean
    double sigma = 0.25;             // lognormal: log-space spread
    double lo = 0.0, hi = 1.0;       // uniform support
};

struct Agent {
    std::string id;
    std::string type;  // bargain_hunter | normal | high_flyer | provider
    std::vector<AgentAction> script;
    std::vector<Tick> policy_times;  // when the stochastic policy fires
    ValuationSpec valuation;
    bool hidden_bids = false;
};

struct Scenario {
    int schema_version = 1;
    Bounds bounds;
    double fee_rate = 0.003;
    int epoch_count = 1;
    Tick epoch_stride = 10;
    std::string mechanism = "dutch";  // dutch | matching
    double floor = 0.0;
    bool oracle = false;
    double min_bid_increment = 0.0;
    double pool_x = 0.0;
    double pool_y = 0.0;
    std::string founder_id = "lp0";
    double founder_constant = 1.0;
    double founder_ask = 0.0;
    std::vector<Agent> agents;
    std::uint64_t seed = 0;

    EpochSchedule schedule() const { return EpochSchedule::uniform(epoch_count, epoch_stride); }

    // Collects every violated invariant; throws one ValidationError listing all.
    void validate() const;
};

namespace detail {

inline bool clean_id(const std::string& id) {
    if (id.empty()) return false;
    for (char ch : id)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
              ch == '.'))
            return false;
    return true;
}

}  // namespace detail

inline void Scenario::validate() const {
    std::vector<std::string> errors;
    if (schema_version != 1)
        errors.push_back("schema_version: only version 1 is supported");
    if (!(bounds.a > 0.0) || !(bounds.a < bounds.b))
        errors.push_back("bounds: require 0 < a < b");
    if (!(fee_rate >= 0.0 && fee_rate < 1.0))
        errors.push_back("fee_rate: must be in [0, 1)");
    if (epoch_count < 1) errors.push_back("epochs.count: must be at least 1");
    if (epoch_stride < 1) errors.push_back("epochs.stride: must be at least 1");
    if (mechanism != "dutch" && mechanism != "matching")
        errors.push_back("clearing.mechanism: '" + mechanism +
                         "' not recognized (allowed: dutch, matching)");
    if (!(floor >= 0.0)) errors.push_back("clearing.floor: must be nonnegative");
    if (!(min_bid_increment >= 0.0))
        errors.push_back("min_bid_increment: must be nonnegative");
    if (!(pool_x > 0.0) || !(pool_y > 0.0))
        errors.push_back("pool: initial reserves must be positive");
    if (!detail::clean_id(founder_id))
        errors.push_back("pool.provider.id: invalid identifier");
    if (bounds.a < bounds.b &&
        !(founder_constant >= bounds.a && founder_constant <= bounds.b))
        errors.push_back("pool.provider.constant: outside bounds [a, b]");
    if (!(founder_ask >= 0.0)) errors.push_back("pool.provider.ask: must be nonnegative");

    EpochSchedule sched = schedule();
    std::set<Tick> epoch_times(sched.times.begin(), sched.times.end());
    std::set<std::string> ids;
    for (const auto& agent : agents) {
        std::string where = "agents[" + agent.id + "]";
        if (!detail::clean_id(agent.id))
            errors.push_back(where + ".id: invalid identifier");
        if (!ids.insert(agent.id).second)
            errors.push_back(where + ".id: duplicate identifier");
        bool is_provider = agent.type == "provider";
        // a provider agent may reuse the founder id to script the founder
        if (agent.id == founder_id && !is_provider)
            errors.push_back(where + ".id: collides with the founding provider");
        if (agent.type != "bargain_hunter" && agent.type != "normal" &&
            agent.type != "high_flyer" && !is_provider)
            errors.push_back(where + ".type: '" + agent.type +
                             "' not recognized (allowed: bargain_hunter, normal, "
                             "high_flyer, provider)");
        for (const auto& act : agent.script) {
            std::string at = where + ".script@t=" + std::to_string(act.time);
            bool provider_op = act.op == "join" || act.op == "exit" ||
                               act.op == "set_constant" || act.op == "set_ask";
            bool market_op = act.op == "bid" || act.op == "raise" || act.op == "buy" ||
                             act.op == "sell";
            if (!provider_op && !market_op) {
                errors.push_back(at + ": unknown op '" + act.op + "'");
                continue;
            }
            if (provider_op && !is_provider)
                errors.push_back(at + ": op '" + act.op + "' requires a provider agent");
            if (market_op && is_provider)
                errors.push_back(at + ": providers do not place market orders");
            if ((act.op == "join" || act.op == "exit" || act.op == "set_constant") &&
                !epoch_times.count(act.time))
                errors.push_back(at + ": provider changes only at epoch times");
            if (act.op == "join" && !(act.deposit_x > 0.0))
                errors.push_back(at + ": join needs a positive deposit_x");
            if ((act.op == "join" || act.op == "set_constant") &&
                !(act.constant >= bounds.a && act.constant <= bounds.b))
                errors.push_back(at + ": constant outside bounds [a, b]");
            if ((act.op == "bid" || act.op == "raise") && !(act.price > 0.0))
                errors.push_back(at + ": price must be positive");
            if ((act.op == "buy" || act.op == "sell") && act.units < 1)
                errors.push_back(at + ": units must be at least 1");
            if (act.op == "set_ask" && !(act.ask >= 0.0))
                errors.push_back(at + ": ask must be nonnegative");
            if (market_op && act.time >= sched.clearing_time)
                errors.push_back(at + ": market ops must precede clearing time");
        }
        if (!agent.policy_times.empty()) {
            if (is_provider)
                errors.push_back(where + ": provider agents are fully scripted");
            if (agent.valuation.dist != "lognormal" && agent.valuation.dist != "uniform")
                errors.push_back(where + ".valuation.dist: '" + agent.valuation.dist +
                                 "' not recognized (allowed: lognormal, uniform)");
            if (agent.valuation.dist == "lognormal" && !(agent.valuation.mean > 0.0))
                errors.push_back(where + ".valuation.mean: must be positive");
            if (agent.valuation.dist == "uniform" &&
                !(agent.valuation.lo > 0.0 && agent.valuation.lo <= agent.valuation.hi))
                errors.push_back(where + ".valuation: require 0 < lo <= hi");
            for (Tick t : agent.policy_times)
                if (t >= sched.clearing_time)
                    errors.push_back(where + ".policy: times must precede clearing time");
        }
    }
    if (!errors.empty()) {
        std::string joined = "scenario invalid:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw ValidationError(joined);
    }
}

namespace detail {

inline double num_or(const nlohmann::json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

}  // namespace detail

// Parses and validates a scenario document. Parse problems carry the JSON
// location; validation problems list every violated invariant.
inline Scenario load_scenario(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }

    Scenario sc;
    try {
        sc.schema_version = j.value("schema_version", 1);
        if (j.contains("bounds")) {
            sc.bounds.a = detail::num_or(j["bounds"], "a", sc.bounds.a);
            sc.bounds.b = detail::num_or(j["bounds"], "b", sc.bounds.b);
        }
        sc.fee_rate = j.value("fee_rate", sc.fee_rate);
        if (j.contains("epochs")) {
            sc.epoch_count = j["epochs"].value("count", sc.epoch_count);
            sc.epoch_stride = j["epochs"].value("stride", sc.epoch_stride);
        }
        if (j.contains("clearing")) {
            sc.mechanism = j["clearing"].value("mechanism", sc.mechanism);
            sc.floor = j["clearing"].value("floor", sc.floor);
            sc.oracle = j["clearing"].value("oracle", sc.oracle);
        }
        sc.min_bid_increment = j.value("min_bid_increment", sc.min_bid_increment);
        if (j.contains("pool")) {
            const auto& p = j["pool"];
            sc.pool_x = detail::num_or(p, "x", 0.0);
            sc.pool_y = detail::num_or(p, "y", 0.0);
            if (p.contains("provider")) {
                sc.founder_id = p["provider"].value("id", sc.founder_id);
                sc.founder_constant = detail::num_or(p["provider"], "constant", 1.0);
                sc.founder_ask = detail::num_or(p["provider"], "ask", 0.0);
            }
        }
        sc.seed = j.value("seed", std::uint64_t{0});
        for (const auto& ja : j.value("agents", nlohmann::json::array())) {
            Agent agent;
            agent.id = ja.value("id", "");
            agent.type = ja.value("type", "");
            agent.hidden_bids = ja.value("hidden_bids", false);
            for (const auto& js : ja.value("script", nlohmann::json::array())) {
                AgentAction act;
                act.time = js.value("time", Tick{0});
                act.op = js.value("op", "");
                act.price = detail::num_or(js, "price", 0.0);
                act.deposit_x = detail::num_or(js, "deposit_x", 0.0);
                act.constant = detail::num_or(js, "constant", 0.0);
                act.ask = detail::num_or(js, "ask", 0.0);
                act.units = js.value("units", 1);
                act.hidden = js.value("hidden", agent.hidden_bids);
                agent.script.push_back(act);
            }
            if (ja.contains("policy")) {
                const auto& jp = ja["policy"];
                for (const auto& t : jp.value("times", nlohmann::json::array()))
                    agent.policy_times.push_back(t.get<Tick>());
                if (jp.contains("valuation")) {
                    const auto& jv = jp["valuation"];
                    agent.valuation.dist = jv.value("dist", agent.valuation.dist);
                    agent.valuation.mean = detail::num_or(jv, "mean", agent.valuation.mean);
                    agent.valuation.sigma =
                        detail::num_or(jv, "sigma", agent.valuation.sigma);
                    agent.valuation.lo = detail::num_or(jv, "lo", agent.valuation.lo);
                    agent.valuation.hi = detail::num_or(jv, "hi", agent.valuation.hi);
                }
            }
            sc.agents.push_back(std::move(agent));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }

    sc.validate();
    return sc;
}

}  // namespace pamm

#endif
