#ifndef PAMM_TRACE_HPP
#define PAMM_TRACE_HPP

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pamm/errors.hpp"
#include "pamm/pool.hpp"

namespace pamm {

// One replayable simulator event. Numeric payload fields are optional; which
// ones are set depends on the kind (schema notes in the README).
struct TraceEvent {
    std::uint64_t seq = 0;
    Tick time = 0;
    std::string kind;    // tick join exit set_constant amm_trade bid_submit
                         // bid_raise bid_fill clearing_fill residual_fill
                         // fee_credit metric
    std::string actor;   // provider / user / agent id
    std::string ref;     // bid id
    std::string ref2;    // unit id
    std::string detail;  // sub-kind: buy sell genesis retrieval dutch match
                         // payout refund hidden ...
    std::optional<double> units;
    std::optional<double> price;
    std::optional<double> x_amount;
    std::optional<double> y_amount;
    std::optional<double> fee;
    std::optional<double> share;
    std::optional<double> c_value;
    std::optional<double> dl;
    std::optional<double> order_loss;
};

inline constexpr const char* kTraceHeader =
    "seq,time,kind,actor,ref,ref2,detail,units,price,x_amount,y_amount,fee,share,"
    "c_value,dl,order_loss";

inline constexpr int kTraceColumns = 16;

namespace detail {

// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string format_opt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

inline std::optional<double> parse_opt(const std::string& field, int line) {
    if (field.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw ParseError("trace line " + std::to_string(line) + ": bad number '" +
                         field + "'");
    return v;
}

}  // namespace detail

inline std::string trace_line(const TraceEvent& e) {
    std::string out;
    out += std::to_string(e.seq);
    out += ',';
    out += std::to_string(e.time);
    out += ',';
    out += e.kind;
    out += ',';
    out += e.actor;
    out += ',';
    out += e.ref;
    out += ',';
    out += e.ref2;
    out += ',';
    out += e.detail;
    for (const auto* v : {&e.units, &e.price, &e.x_amount, &e.y_amount, &e.fee, &e.share,
                          &e.c_value, &e.dl, &e.order_loss}) {
        out += ',';
        out += detail::format_opt(*v);
    }
    return out;
}

// Writes the full trace; bids flagged hidden have their price and escrow
// columns blanked on submit/raise rows when `redact_hidden` is set.
inline void write_trace(std::ostream& os, const std::vector<TraceEvent>& trace,
                        bool redact_hidden = true) {
    os << kTraceHeader << '\n';
    for (const auto& e : trace) {
        if (redact_hidden && e.detail == "hidden" &&
            (e.kind == "bid_submit" || e.kind == "bid_raise")) {
            TraceEvent masked = e;
            masked.price.reset();
            masked.x_amount.reset();
            os << trace_line(masked) << '\n';
        } else {
            os << trace_line(e) << '\n';
        }
    }
}

inline std::vector<TraceEvent> read_trace(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw ParseError("trace: empty input");
    if (line != kTraceHeader)
        throw ParseError("trace: unrecognized header");
    std::vector<TraceEvent> trace;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        while (static_cast<int>(fields.size()) < kTraceColumns) fields.emplace_back();
        if (static_cast<int>(fields.size()) != kTraceColumns)
            throw ParseError("trace line " + std::to_string(line_no) +
                             ": wrong column count");
        TraceEvent e;
        e.seq = std::stoull(fields[0]);
        e.time = std::stoll(fields[1]);
        e.kind = fields[2];
        e.actor = fields[3];
        e.ref = fields[4];
        e.ref2 = fields[5];
        e.detail = fields[6];
        e.units = detail::parse_opt(fields[7], line_no);
        e.price = detail::parse_opt(fields[8], line_no);
        e.x_amount = detail::parse_opt(fields[9], line_no);
        e.y_amount = detail::parse_opt(fields[10], line_no);
        e.fee = detail::parse_opt(fields[11], line_no);
        e.share = detail::parse_opt(fields[12], line_no);
        e.c_value = detail::parse_opt(fields[13], line_no);
        e.dl = detail::parse_opt(fields[14], line_no);
        e.order_loss = detail::parse_opt(fields[15], line_no);
        trace.push_back(std::move(e));
    }
    return trace;
}

}  // namespace pamm

#endif
