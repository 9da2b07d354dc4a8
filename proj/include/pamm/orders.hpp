#ifndef PAMM_ORDERS_HPP
#define PAMM_ORDERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pamm/errors.hpp"
#include "pamm/pool.hpp"

namespace pamm {

// A locked, escrowed commitment to buy one unit of Y for at most `price` X.
// Prices may only rise over a bid's lifetime; escrow always covers the price.
struct Bid {
    std::string id;
    std::string user;
    double price = 0.0;
    double escrow = 0.0;
    Tick submitted_at = 0;
    bool hidden = false;
    std::uint64_t seq = 0;  // submission sequence, the final tie-break
};

// One remaining unit of Y at clearing, with its owner and the owner's ask.
struct UnitListing {
    std::string unit_id;
    std::string owner;
    double ask = 0.0;
};

inline bool bid_book_order(const Bid& lhs, const Bid& rhs) {
    if (lhs.price != rhs.price) return lhs.price > rhs.price;
    if (lhs.submitted_at != rhs.submitted_at) return lhs.submitted_at < rhs.submitted_at;
    return lhs.seq < rhs.seq;
}

// Bid book plus per-unit listings. Bids are kept in (price desc, time asc)
// order, listings in (ask desc, insertion asc) order, after every mutation.
class OrderBook {
public:
    struct AmmFill {
        std::string bid_id;
        std::string user;
        double charged = 0.0;  // gross X paid, fee included
        double curve_x = 0.0;
        double fee = 0.0;
        double refund = 0.0;  // escrow returned (escrow - charged)
    };

    struct ClearingSnapshot {
        std::vector<UnitListing> units;  // ask desc
        std::vector<Bid> bids;           // price desc
    };

    explicit OrderBook(Tick clearing_time, double min_bid_increment = 0.0)
        : clearing_time_(clearing_time), min_bid_increment_(min_bid_increment) {}

    const std::vector<Bid>& bids() const { return bids_; }
    const std::vector<UnitListing>& listings() const { return listings_; }
    bool frozen() const { return frozen_; }

    // Total escrow ever taken in (initial submissions plus raises); with open
    // escrow, refunds, and payments this forms the conservation identity.
    double total_escrow_in() const { return total_escrow_in_; }

    double open_escrow() const {
        double s = 0.0;
        for (const auto& b : bids_) s += b.escrow;
        return s;
    }

    std::string submit_bid(const std::string& user, double price, Tick now,
                           bool hidden = false) {
        if (frozen_ || now >= clearing_time_)
            throw MarketClosedError("submit_bid: market closed for new orders");
        if (!(price > min_bid_increment_) || !(price > 0.0))
            throw DomainError("submit_bid: price must exceed the minimum increment");
        Bid b;
        b.id = "b" + std::to_string(next_seq_);
        b.user = user;
        b.price = price;
        b.escrow = price;
        b.submitted_at = now;
        b.hidden = hidden;
        b.seq = next_seq_++;
        total_escrow_in_ += price;
        bids_.push_back(b);
        std::sort(bids_.begin(), bids_.end(), bid_book_order);
        return b.id;
    }

    const Bid& bid(const std::string& bid_id) const {
        for (const auto& b : bids_)
            if (b.id == bid_id) return b;
        throw MembershipError("no open bid " + bid_id);
    }

    void raise_bid(const std::string& bid_id, double new_price) {
        auto it = std::find_if(bids_.begin(), bids_.end(),
                               [&](const Bid& b) { return b.id == bid_id; });
        if (it == bids_.end())
            throw MembershipError("raise_bid: no open bid " + bid_id);
        if (!(new_price > it->price))
            throw LockedOrderError("raise_bid: price may only increase");
        total_escrow_in_ += new_price - it->escrow;
        it->price = new_price;
        it->escrow = new_price;
        std::sort(bids_.begin(), bids_.end(), bid_book_order);
    }

    // Bids are locked: withdrawal is never allowed.
    void withdraw_bid(const std::string& bid_id) {
        (void)bid(bid_id);
        throw LockedOrderError("withdraw_bid: orders are locked once placed");
    }

    // Executes every crossing bid at the AMM price (not the bid price),
    // highest price first, earlier submission winning ties. Call after every
    // pool-state or curve change.
    std::vector<AmmFill> match_against_amm(Pool& pool) {
        std::vector<AmmFill> fills;
        if (frozen_) return fills;
        while (!bids_.empty() && pool.has_unit_inventory()) {
            const Bid& top = bids_.front();
            double gross = pool.unit_buy_cost_gross();
            if (top.price < gross) break;
            auto trade = pool.buy_units(1);
            AmmFill f{top.id, top.user, trade.gross, trade.curve_x, trade.fee,
                      top.escrow - trade.gross};
            fills.push_back(f);
            bids_.erase(bids_.begin());
        }
        return fills;
    }

    void add_listing(const UnitListing& listing) {
        listings_.push_back(listing);
        listing_seq_.push_back(next_listing_seq_++);
        sort_listings();
    }

    void set_unit_ask(const std::string& owner, const std::string& unit_id, double ask) {
        auto it = std::find_if(listings_.begin(), listings_.end(),
                               [&](const UnitListing& u) { return u.unit_id == unit_id; });
        if (it == listings_.end())
            throw MembershipError("set_unit_ask: no unit " + unit_id);
        if (it->owner != owner)
            throw OwnershipError("set_unit_ask: " + owner + " does not own " + unit_id);
        if (!(ask >= 0.0))
            throw DomainError("set_unit_ask: ask must be nonnegative");
        it->ask = ask;
        sort_listings();
    }

    // Freezes the book and allocates the remaining whole units of Y to
    // providers in proportion to shares, by largest-remainder rounding with
    // ties going to the lexicographically least provider id.
    ClearingSnapshot snapshot_for_clearing(const Pool& pool) {
        if (pool.clock() < clearing_time_)
            throw PrematureSnapshotError("snapshot_for_clearing: before clearing time");
        long long total_units = static_cast<long long>(std::floor(pool.state().y));

        struct Alloc {
            std::string id;
            double ask;
            long long base;
            double remainder;
        };
        std::vector<Alloc> allocs;
        long long assigned = 0;
        for (const auto& [id, lp] : pool.providers()) {
            double quota = lp.share * static_cast<double>(total_units);
            long long base = static_cast<long long>(std::floor(quota));
            allocs.push_back({id, lp.unit_ask, base, quota - static_cast<double>(base)});
            assigned += base;
        }
        std::vector<std::size_t> order(allocs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
            if (allocs[l].remainder != allocs[r].remainder)
                return allocs[l].remainder > allocs[r].remainder;
            return allocs[l].id < allocs[r].id;
        });
        std::size_t leftover = static_cast<std::size_t>(total_units - assigned);
        for (std::size_t i = 0; i < leftover && i < order.size(); ++i)
            ++allocs[order[i]].base;

        long long unit_counter = 0;
        for (const auto& alloc : allocs) {
            for (long long u = 0; u < alloc.base; ++u) {
                add_listing(UnitListing{"u" + std::to_string(unit_counter++), alloc.id,
                                        alloc.ask});
            }
        }

        frozen_ = true;
        ClearingSnapshot snap;
        snap.units = listings_;
        snap.bids = bids_;
        return snap;
    }

private:
    void sort_listings() {
        std::vector<std::size_t> order(listings_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
            if (listings_[l].ask != listings_[r].ask)
                return listings_[l].ask > listings_[r].ask;
            return listing_seq_[l] < listing_seq_[r];
        });
        std::vector<UnitListing> sorted_listings;
        std::vector<std::uint64_t> sorted_seq;
        sorted_listings.reserve(listings_.size());
        sorted_seq.reserve(listings_.size());
        for (std::size_t idx : order) {
            sorted_listings.push_back(listings_[idx]);
            sorted_seq.push_back(listing_seq_[idx]);
        }
        listings_ = std::move(sorted_listings);
        listing_seq_ = std::move(sorted_seq);
    }

    Tick clearing_time_;
    double min_bid_increment_;
    std::vector<Bid> bids_;
    std::vector<UnitListing> listings_;
    std::vector<std::uint64_t> listing_seq_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_listing_seq_ = 0;
    double total_escrow_in_ = 0.0;
    bool frozen_ = false;
};

}  // namespace pamm

#endif
