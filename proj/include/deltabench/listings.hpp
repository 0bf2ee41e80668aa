#pragma once

// Listed-option universe along a price path, following exchange listing
// conventions for monthly index options: fourth-Friday expiries, twelve
// consecutive expiry months, a fixed strike step and ladder extension when
// the spot trades through the outermost strike.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "calendar.hpp"
#include "csv.hpp"
#include "simkit.hpp"

namespace deltabench {

enum class OptionKind { call, put };

inline const char* to_string(OptionKind k) { return k == OptionKind::call ? "call" : "put"; }

inline OptionKind parse_kind(std::string_view s) {
    if (s == "call" || s == "C" || s == "c") return OptionKind::call;
    if (s == "put" || s == "P" || s == "p") return OptionKind::put;
    throw InputError("unknown option kind '" + std::string(s) + "'");
}

struct OptionContract {
    std::string id;
    OptionKind kind = OptionKind::call;
    double strike = 0.0;
    Date expiry{};
    Date listing_date{};
    std::int64_t first_day = 0;  ///< trading-day index of listing
    std::int64_t last_day = 0;   ///< trading-day index of expiry
};

struct ListingRules {
    double strike_step = 5.0;
    double closeness = 1.0;  ///< spot within this distance of a strike lists a third strike
    int expiry_months = 12;
};

struct StrikeLadder {
    std::int64_t lowest = 0;  ///< in strike-step units
    std::int64_t highest = 0;
};

struct ListingState {
    std::map<Date, StrikeLadder> ladders;  ///< active expiries

    std::vector<Date> expiries() const {
        std::vector<Date> out;
        for (const auto& [e, _] : ladders) out.push_back(e);
        return out;
    }
};

inline std::string contract_id(OptionKind kind, Date expiry, double strike) {
    std::chrono::year_month_day ymd{expiry};
    char buf[48];
    std::snprintf(buf, sizeof buf, "%c%04d%02u%02uK%.0f", kind == OptionKind::call ? 'C' : 'P',
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), strike);
    return buf;
}

namespace detail {

inline Date next_expiry_after(Date d) {
    std::chrono::year_month_day ymd{d};
    int y = static_cast<int>(ymd.year());
    unsigned m = static_cast<unsigned>(ymd.month());
    Date e = fourth_friday(y, m);
    while (e <= d) {
        if (++m > 12) {
            m = 1;
            ++y;
        }
        e = fourth_friday(y, m);
    }
    return e;
}

inline void list_strike(std::vector<OptionContract>& out, Date expiry, std::int64_t k, Date date,
                        const ListingRules& rules) {
    const double strike = static_cast<double>(k) * rules.strike_step;
    for (OptionKind kind : {OptionKind::call, OptionKind::put}) {
        OptionContract c;
        c.id = contract_id(kind, expiry, strike);
        c.kind = kind;
        c.strike = strike;
        c.expiry = expiry;
        c.listing_date = date;
        out.push_back(std::move(c));
    }
}

} // namespace detail

/// Advance the listing state to the close of `date`. Returns contracts listed
/// on that date (day ranges left for the caller to fill in).
inline std::vector<OptionContract> evolve_listings(ListingState& state, double spot, Date date,
                                                   const ListingRules& rules = {}) {
    if (!is_weekday(date)) throw ParameterError("evolve_listings: date must be a weekday");
    if (!(spot > 0.0)) throw ParameterError("evolve_listings: spot must be positive");
    std::vector<OptionContract> listed;

    // Expired months leave the book the day after expiry.
    for (auto it = state.ladders.begin(); it != state.ladders.end();) {
        if (it->first < date)
            it = state.ladders.erase(it);
        else
            ++it;
    }

    auto live_count = [&] {
        return std::count_if(state.ladders.begin(), state.ladders.end(),
                             [&](const auto& kv) { return kv.first > date; });
    };
    while (live_count() < rules.expiry_months) {
        const Date from = state.ladders.empty() ? date : std::max(date, state.ladders.rbegin()->first);
        const Date expiry = detail::next_expiry_after(from);
        const double units = spot / rules.strike_step;
        std::int64_t lower = static_cast<std::int64_t>(std::floor(units));
        std::int64_t upper = lower + 1;
        const double dist_lower = spot - static_cast<double>(lower) * rules.strike_step;
        const double dist_upper = static_cast<double>(upper) * rules.strike_step - spot;
        if (dist_upper > 0.0 && dist_upper <= rules.closeness)
            ++upper;
        else if (dist_lower > 0.0 && dist_lower <= rules.closeness)
            --lower;
        state.ladders[expiry] = StrikeLadder{lower, upper};
        for (std::int64_t k = lower; k <= upper; ++k) detail::list_strike(listed, expiry, k, date, rules);
    }

    for (auto& [expiry, ladder] : state.ladders) {
        if (expiry <= date) continue;
        while (static_cast<double>(ladder.highest) * rules.strike_step < spot)
            detail::list_strike(listed, expiry, ++ladder.highest, date, rules);
        while (static_cast<double>(ladder.lowest) * rules.strike_step > spot)
            detail::list_strike(listed, expiry, --ladder.lowest, date, rules);
    }
    return listed;
}

struct OptionUniverse {
    std::vector<OptionContract> contracts;
    ListingState state;  ///< state after the last path day, for continuation paths
};

/// Runs the listing rules along the path. `from_day` skips listing on earlier
/// path days (used when a continuation path shares its first point with the
/// parent path); `state` carries an existing book forward.
inline OptionUniverse generate_option_universe(const PricePath& path, const TradingCalendar& calendar,
                                               ListingState state = {}, const ListingRules& rules = {},
                                               std::int64_t from_day = std::numeric_limits<std::int64_t>::min()) {
    if (path.size() == 0) throw ParameterError("generate_option_universe: empty path");
    OptionUniverse out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const std::int64_t day = path.dates[i];
        if (day < from_day) continue;
        const Date date = calendar.date_of(day);
        auto listed = evolve_listings(state, path.spot[i], date, rules);
        for (auto& c : listed) {
            c.first_day = day;
            c.last_day = calendar.day_of(c.expiry);
            out.contracts.push_back(std::move(c));
        }
    }
    out.state = std::move(state);
    return out;
}

inline void write_contracts_csv(std::ostream& os, const std::vector<OptionContract>& contracts) {
    csv::Writer w(os);
    w.header({"id", "kind", "strike", "expiry", "first_day", "last_day"});
    for (const auto& c : contracts) {
        w.field(c.id).field(std::string(to_string(c.kind))).field(c.strike).field(format_date(c.expiry));
        w.field(c.first_day).field(c.last_day);
        w.end_row();
    }
}

inline std::vector<OptionContract> read_contracts_csv(std::istream& is, const TradingCalendar* calendar = nullptr,
                                                      std::string_view source = "contracts.csv") {
    auto t = csv::Table::read(is, source);
    const auto c_id = t.column("id"), c_kind = t.column("kind"), c_strike = t.column("strike"),
               c_exp = t.column("expiry");
    const bool ranges = t.has("first_day") && t.has("last_day");
    std::vector<OptionContract> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        OptionContract c;
        c.id = t.at(r, c_id);
        c.kind = parse_kind(t.at(r, c_kind));
        c.strike = t.number(r, c_strike);
        if (!(c.strike > 0.0)) throw InputError(std::string(source) + ": non-positive strike for " + c.id);
        c.expiry = parse_date(t.at(r, c_exp));
        if (ranges) {
            c.first_day = t.integer(r, t.column("first_day"));
            c.last_day = t.integer(r, t.column("last_day"));
        } else if (calendar) {
            c.last_day = calendar->day_of(c.expiry);
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace deltabench
