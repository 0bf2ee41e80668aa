#pragma once

// Sample-table assembly: pricing listed contracts along a path, cleaning,
// normalisation to S0 = 100, chronological window splits and tick matching.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "calendar.hpp"
#include "error.hpp"
#include "listings.hpp"
#include "pricer.hpp"
#include "sample.hpp"
#include "simkit.hpp"

namespace deltabench {

// ---------------------------------------------------------------------------
// Cleaning

enum class CleanRule {
    tau_min,
    moneyness,
    otm_only,
    tau_filter,
    missing_next,
    min_price,
    negative_time_value,
    implied_vol,
    zero_volume,
    wide_spread,
    min_bid,
};

inline constexpr std::array kAllCleanRules = {
    CleanRule::tau_min,     CleanRule::moneyness,           CleanRule::otm_only,
    CleanRule::tau_filter,  CleanRule::missing_next,        CleanRule::min_price,
    CleanRule::negative_time_value, CleanRule::implied_vol, CleanRule::zero_volume,
    CleanRule::wide_spread, CleanRule::min_bid,
};

inline const char* to_string(CleanRule r) {
    switch (r) {
        case CleanRule::tau_min: return "tau_below_one_day";
        case CleanRule::moneyness: return "moneyness_out_of_range";
        case CleanRule::otm_only: return "in_the_money";
        case CleanRule::tau_filter: return "tau_filter";
        case CleanRule::missing_next: return "missing_next_price";
        case CleanRule::min_price: return "price_below_tick";
        case CleanRule::negative_time_value: return "negative_time_value";
        case CleanRule::implied_vol: return "implied_vol_out_of_range";
        case CleanRule::zero_volume: return "zero_volume";
        case CleanRule::wide_spread: return "ask_at_least_twice_bid";
        case CleanRule::min_bid: return "bid_below_minimum";
    }
    return "?";
}

struct CleaningRules {
    bool tau_min = true;
    bool moneyness = true;
    bool otm_only = true;
    bool missing_next = true;
    bool min_price = true;
    bool negative_time_value = true;
    bool implied_vol = true;
    bool quote_rules = true;  ///< zero volume, wide spread, minimum bid (only where quotes exist)

    double moneyness_lo = 0.8;
    double moneyness_hi = 1.5;
    double iv_lo = 0.01;
    double iv_hi = 1.0;
    double price_tick = 0.01;
    double min_bid_value = 0.05;
    /// Drops samples with at most this many calendar days to expiry.
    std::optional<double> tau_filter_calendar_days;
};

/// Calendar days to expiry on the weekday calendar (5 trading days per week).
inline double calendar_days_to_expiry(double tau) { return tau * kTradingDaysPerYear * 7.0 / 5.0; }

/// Rules evaluable from contract terms and spot alone.
inline bool is_static_rule(CleanRule r) {
    return r == CleanRule::tau_min || r == CleanRule::moneyness || r == CleanRule::otm_only ||
           r == CleanRule::tau_filter;
}

/// True if `s` violates `rule` under `rules` (disabled rules never fire).
inline bool violates(const Sample& s, CleanRule rule, const CleaningRules& rules) {
    switch (rule) {
        case CleanRule::tau_min:
            return rules.tau_min && !(s.tau >= kDayFraction * (1.0 - 1e-9));
        case CleanRule::moneyness:
            return rules.moneyness && !(s.moneyness >= rules.moneyness_lo && s.moneyness <= rules.moneyness_hi);
        case CleanRule::otm_only:
            return rules.otm_only && (s.cp_flag == 0 ? s.moneyness > 1.0 : s.moneyness < 1.0);
        case CleanRule::tau_filter:
            return rules.tau_filter_calendar_days &&
                   !(calendar_days_to_expiry(s.tau) > *rules.tau_filter_calendar_days + 1e-9);
        case CleanRule::missing_next:
            return rules.missing_next && !std::isfinite(s.C1);
        case CleanRule::min_price:
            return rules.min_price && !(s.C0 >= rules.price_tick);
        case CleanRule::negative_time_value: {
            if (!rules.negative_time_value) return false;
            const auto [lo, hi] = price_bounds(s.S0, s.strike, s.tau, s.r, s.kind());
            (void)hi;
            return !(s.C0 >= lo - 1e-10 * s.S0);
        }
        case CleanRule::implied_vol: {
            if (!rules.implied_vol) return false;
            const double iv = s.sigma_impl();
            return !(iv >= rules.iv_lo && iv <= rules.iv_hi);
        }
        case CleanRule::zero_volume:
            return rules.quote_rules && std::isfinite(s.volume) && s.volume <= 0.0;
        case CleanRule::wide_spread:
            return rules.quote_rules && std::isfinite(s.bid) && std::isfinite(s.ask) && s.ask >= 2.0 * s.bid;
        case CleanRule::min_bid:
            return rules.quote_rules && std::isfinite(s.bid) && s.bid < rules.min_bid_value;
    }
    return false;
}

/// First violated rule in canonical order, if any.
inline std::optional<CleanRule> first_violation(const Sample& s, const CleaningRules& rules) {
    for (CleanRule r : kAllCleanRules)
        if (violates(s, r, rules)) return r;
    return std::nullopt;
}

struct CleaningReport {
    std::int64_t input = 0;
    std::map<CleanRule, std::int64_t> removed;  ///< attributed to the first violated rule
    std::int64_t retained_calls = 0;
    std::int64_t retained_puts = 0;

    std::int64_t total_removed() const {
        std::int64_t n = 0;
        for (const auto& [_, c] : removed) n += c;
        return n;
    }
    std::int64_t retained() const { return retained_calls + retained_puts; }

    void merge(const CleaningReport& other) {
        input += other.input;
        for (const auto& [r, c] : other.removed) removed[r] += c;
        retained_calls += other.retained_calls;
        retained_puts += other.retained_puts;
    }

    void write_csv(std::ostream& os) const {
        csv::Writer w(os);
        w.header({"item", "count"});
        w.field(std::string("input")).field(input);
        w.end_row();
        for (CleanRule r : kAllCleanRules) {
            auto it = removed.find(r);
            w.field(std::string("removed_") + to_string(r)).field(it == removed.end() ? 0 : it->second);
            w.end_row();
        }
        w.field(std::string("retained_calls")).field(retained_calls);
        w.end_row();
        w.field(std::string("retained_puts")).field(retained_puts);
        w.end_row();
    }
};

/// Removes every sample that violates an enabled rule. Each rule is a
/// per-row predicate, so the retained set does not depend on rule order.
inline std::pair<SampleTable, CleaningReport> clean(const SampleTable& table, const CleaningRules& rules) {
    CleaningReport report;
    report.input = static_cast<std::int64_t>(table.size());
    SampleTable out;
    out.reserve(table.size());
    for (const auto& s : table) {
        if (auto v = first_violation(s, rules)) {
            ++report.removed[*v];
            continue;
        }
        (s.cp_flag == 1 ? report.retained_puts : report.retained_calls)++;
        out.push_back(s);
    }
    return {std::move(out), report};
}

// ---------------------------------------------------------------------------
// Normalisation

/// Rescales prices so that S0 = 100 (replicating 100/S0 options). Delta and
/// Vanna are scale-free; Vega scales with price, Gamma inversely.
inline Sample normalize(Sample s) {
    if (!(s.S0 > 0.0)) throw InputError("normalize: S0 must be positive");
    const double f = 100.0 / s.S0;
    if (f == 1.0) return s;
    s.S0 = 100.0;
    s.S1 *= f;
    s.C0 *= f;
    s.C1 *= f;
    s.strike *= f;
    s.vega_bs *= f;
    s.gamma_bs /= f;
    s.atm_strike *= f;
    s.atm_C0 *= f;
    s.atm_C1 *= f;
    s.bid *= f;
    s.ask *= f;
    return s;
}

inline void normalize_table(SampleTable& table) {
    for (auto& s : table) s = normalize(std::move(s));
}

// ---------------------------------------------------------------------------
// Building samples along a simulated path

struct BsPricing {
    double sigma = 0.2;
};

struct HestonPricing {
    HestonParams params;
};

using PricingModel = std::variant<BsPricing, HestonPricing>;

struct BuildOptions {
    int horizon_days = 1;
    double r_onr = 0.0;
    double r = 0.0;
    std::int64_t from_day = std::numeric_limits<std::int64_t>::min();  ///< first sample day
    const CleaningRules* prefilter = nullptr;  ///< clean while building; skips pricing of rejected rows
    double strike_step = 5.0;                  ///< rounds the ATM hedge-instrument strike
    double atm_tenor = 1.0 / 12.0;
    HestonQuadrature quadrature{};
};

struct BuildResult {
    SampleTable table;
    std::int64_t dropped_horizon = 0;  ///< contract expires (or path ends) inside the period
    CleaningReport report;             ///< filled when a prefilter is given
};

namespace detail {

class SliceCache {
public:
    SliceCache(const HestonParams& p, const PricePath& path, double r, HestonQuadrature q)
        : params_(p), path_(path), r_(r), quad_(q) {}

    const HestonSlice& get(std::int64_t day, double tau) {
        auto key = std::make_pair(day, tau);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        return cache_
            .emplace(key, HestonSlice(params_, path_.spot_on(day), std::max(path_.variance_on(day), 1e-10), tau, r_, quad_))
            .first->second;
    }

    void evict_before(std::int64_t day) {
        for (auto it = cache_.begin(); it != cache_.end();) {
            if (it->first.first < day)
                it = cache_.erase(it);
            else
                ++it;
        }
    }

private:
    HestonParams params_;
    const PricePath& path_;
    double r_;
    HestonQuadrature quad_;
    std::map<std::pair<std::int64_t, double>, HestonSlice> cache_;
};

inline double intrinsic(double S, double K, OptionKind kind) {
    return kind == OptionKind::call ? std::max(S - K, 0.0) : std::max(K - S, 0.0);
}

} // namespace detail

/// One row per (contract, live day) whose end of period lies on the path and
/// within the contract's life. Implied volatility is the model sigma for
/// Black-Scholes prices and the inverted value for Heston prices.
inline BuildResult build_samples(const PricePath& path, const std::vector<OptionContract>& contracts,
                                 const PricingModel& model, const TradingCalendar& calendar,
                                 const BuildOptions& opt = {}) {
    if (opt.horizon_days < 1) throw ParameterError("build_samples: horizon must be at least one day");
    const bool heston = std::holds_alternative<HestonPricing>(model);
    if (heston && !path.variance) throw InputError("build_samples: Heston pricing needs a path with variance");
    BuildResult out;
    std::optional<detail::SliceCache> cache;
    if (heston) cache.emplace(std::get<HestonPricing>(model).params, path, opt.r, opt.quadrature);
    const double bs_sigma = heston ? 0.0 : std::get<BsPricing>(model).sigma;

    std::vector<const OptionContract*> sorted;
    for (const auto& c : contracts) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->last_day != b->last_day) return a->last_day < b->last_day;
        if (a->strike != b->strike) return a->strike < b->strike;
        return a->kind < b->kind;
    });

    const std::int64_t h = opt.horizon_days;
    const double dt = static_cast<double>(h) * kDayFraction;
    std::int64_t next_index = 0;

    auto price_at = [&](std::int64_t day, const OptionContract& c) -> double {
        const double tau = static_cast<double>(c.last_day - day) * kDayFraction;
        const double S = path.spot_on(day);
        if (c.last_day == day) return detail::intrinsic(S, c.strike, c.kind);
        if (heston) return cache->get(day, tau).price(c.strike, c.kind);
        return bs_price(S, c.strike, tau, bs_sigma, opt.r, c.kind);
    };

    const std::int64_t start = std::max(path.first_day(), opt.from_day);
    for (std::int64_t t = start; t <= path.last_day(); ++t) {
        if (cache) cache->evict_before(t);
        const double S0 = path.spot_on(t);
        double atm_k = kNaN, atm_c0 = kNaN, atm_c1 = kNaN;
        bool atm_done = false;
        for (const OptionContract* cp : sorted) {
            const OptionContract& c = *cp;
            if (c.first_day > t || c.last_day <= t) continue;
            const std::int64_t t1 = t + h;
            if (t1 > c.last_day || t1 > path.last_day()) {
                ++out.dropped_horizon;
                continue;
            }
            Sample s;
            s.day = t;
            s.date = calendar.date_of(t);
            s.contract = c.id;
            s.cp_flag = c.kind == OptionKind::put ? 1 : 0;
            s.strike = c.strike;
            s.S0 = S0;
            s.S1 = path.spot_on(t1);
            s.tau = static_cast<double>(c.last_day - t) * kDayFraction;
            s.r = opt.r;
            s.r_onr = opt.r_onr;
            s.delta_t = dt;
            s.moneyness = S0 / c.strike;
            if (opt.prefilter) {
                ++out.report.input;
                bool rejected = false;
                for (CleanRule r : kAllCleanRules) {
                    if (is_static_rule(r) && violates(s, r, *opt.prefilter)) {
                        ++out.report.removed[r];
                        rejected = true;
                        break;
                    }
                }
                if (rejected) continue;
            }

            s.C0 = price_at(t, c);
            s.C1 = price_at(t1, c);
            const double tau1 = static_cast<double>(c.last_day - t1) * kDayFraction;
            double iv = bs_sigma;
            if (heston) {
                const auto& hp = std::get<HestonPricing>(model).params;
                s.Y0 = path.variance_on(t);
                try {
                    iv = implied_vol(s.C0, S0, c.strike, s.tau, opt.r, c.kind).sigma_impl;
                } catch (const Error&) {
                    iv = kNaN;
                }
                if (tau1 > 0.0) {
                    try {
                        s.iv1 = implied_vol(s.C1, s.S1, c.strike, tau1, opt.r, c.kind).sigma_impl;
                    } catch (const Error&) {
                        s.iv1 = kNaN;
                    }
                }
                if (!atm_done) {
                    atm_k = std::round(S0 / opt.strike_step) * opt.strike_step;
                    atm_c0 = cache->get(t, opt.atm_tenor).price(atm_k, OptionKind::call);
                    const double atm_tau1 = opt.atm_tenor - dt;
                    atm_c1 = atm_tau1 > 0.0 ? cache->get(t1, atm_tau1).price(atm_k, OptionKind::call)
                                            : detail::intrinsic(s.S1, atm_k, OptionKind::call);
                    atm_done = true;
                    (void)hp;
                }
                s.atm_strike = atm_k;
                s.atm_C0 = atm_c0;
                s.atm_C1 = atm_c1;
            } else if (tau1 > 0.0) {
                s.iv1 = bs_sigma;
            }
            if (std::isfinite(iv)) {
                const BsQuote q = bs_greeks(S0, c.strike, s.tau, iv, opt.r, c.kind);
                s.sqrt_total_implied_variance = iv * std::sqrt(s.tau);
                s.delta_bs = q.delta;
                s.vega_bs = q.vega;
                s.gamma_bs = q.gamma;
                s.vanna_bs = q.vanna;
            }
            if (opt.prefilter) {
                if (auto v = first_violation(s, *opt.prefilter)) {
                    ++out.report.removed[*v];
                    continue;
                }
                (s.cp_flag == 1 ? out.report.retained_puts : out.report.retained_calls)++;
            }
            s.index = next_index++;
            out.table.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Moneyness buckets

/// Median of |M - 1| over the table; splits it into two similar-size buckets.
inline double moneyness_threshold(const SampleTable& table) {
    if (table.empty()) throw InputError("moneyness_threshold: empty table");
    std::vector<double> d;
    d.reserve(table.size());
    for (const auto& s : table) d.push_back(std::abs(s.moneyness - 1.0));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    return d[d.size() / 2];
}

/// (near-the-money, out-of-the-money) sub-tables.
inline std::pair<SampleTable, SampleTable> split_by_moneyness(const SampleTable& table, double threshold) {
    std::pair<SampleTable, SampleTable> out;
    for (const auto& s : table)
        (std::abs(s.moneyness - 1.0) <= threshold ? out.first : out.second).push_back(s);
    return out;
}

// ---------------------------------------------------------------------------
// Window splits

struct DayRange {
    std::int64_t first = 0;
    std::int64_t last = -1;  ///< inclusive
    std::int64_t count() const { return last - first + 1; }
    bool contains(std::int64_t d) const { return d >= first && d <= last; }
};

struct WindowSplit {
    int window_id = 0;
    DayRange train;
    DayRange validation;
    DayRange test;
};

struct RollingMode {
    int in_sample_days = 900;
    int test_days = 180;
    int roll_days = 180;
};

struct SingleMode {};

/// Simulation layout: in-sample train/validation on the first path and one
/// test block per out-of-sample path (held in separate tables).
struct SimulationMode {
    int train_days = 360;
    int validation_days = 90;
    int test_days = 90;
};

using SplitMode = std::variant<RollingMode, SingleMode, SimulationMode>;

inline std::vector<std::int64_t> distinct_days(const SampleTable& table) {
    std::set<std::int64_t> days;
    for (const auto& s : table) days.insert(s.day);
    return {days.begin(), days.end()};
}

/// Splits a sorted list of distinct trading days. Ranges are expressed in
/// day values, so gaps in the list never merge neighbouring blocks.
inline std::vector<WindowSplit> split_days(const std::vector<std::int64_t>& days, const SplitMode& mode) {
    const auto n = static_cast<std::int64_t>(days.size());
    auto range = [&](std::int64_t from, std::int64_t count) {
        return DayRange{days[static_cast<std::size_t>(from)], days[static_cast<std::size_t>(from + count - 1)]};
    };
    std::vector<WindowSplit> out;
    if (const auto* rm = std::get_if<RollingMode>(&mode)) {
        const std::int64_t total = rm->in_sample_days + rm->test_days;
        if (rm->in_sample_days % 5 != 0) throw ConfigError("rolling window: in-sample days must split 4:1");
        if (n < total)
            throw ConfigError("split_windows: " + std::to_string(n) + " days is shorter than one window of " +
                              std::to_string(total));
        const std::int64_t train = rm->in_sample_days * 4 / 5;
        const std::int64_t val = rm->in_sample_days - train;
        int id = 0;
        for (std::int64_t start = 0; start + total <= n; start += rm->roll_days) {
            out.push_back({id++, range(start, train), range(start + train, val),
                           range(start + train + val, rm->test_days)});
        }
    } else if (std::holds_alternative<SingleMode>(mode)) {
        if (n < 6) throw ConfigError("split_windows: need at least 6 days for a 4:1:1 split");
        const std::int64_t train = n * 4 / 6;
        const std::int64_t val = n / 6;
        const std::int64_t test = n - train - val;
        out.push_back({0, range(0, train), range(train, val), range(train + val, test)});
    } else {
        const auto& sm = std::get<SimulationMode>(mode);
        // Train covers the first `train_days` day values; every later in-sample
        // day is validation (sample days stop short of the path end by the horizon).
        if (n < 2) throw ConfigError("split_windows: need at least two days");
        const std::int64_t train_end = days.front() + sm.train_days;
        const auto n_train = static_cast<std::int64_t>(std::lower_bound(days.begin(), days.end(), train_end) - days.begin());
        if (n_train == 0 || n_train == n)
            throw ConfigError("split_windows: in-sample span does not cover both training and validation days");
        const std::int64_t in_sample_end = days.front() + sm.train_days + sm.validation_days;
        out.push_back({0, range(0, n_train), range(n_train, n - n_train),
                       DayRange{in_sample_end, in_sample_end + sm.test_days - 1}});
    }
    return out;
}

inline std::vector<WindowSplit> split_windows(const SampleTable& table, const SplitMode& mode) {
    return split_days(distinct_days(table), mode);
}

inline SampleTable select_days(const SampleTable& table, const DayRange& range) {
    SampleTable out;
    for (const auto& s : table)
        if (range.contains(s.day)) out.push_back(s);
    return out;
}

inline void write_windows_csv(std::ostream& os, const std::vector<WindowSplit>& windows) {
    csv::Writer w(os);
    w.header({"window_id", "train_first", "train_last", "validation_first", "validation_last", "test_first",
              "test_last"});
    for (const auto& win : windows) {
        w.field(win.window_id).field(win.train.first).field(win.train.last).field(win.validation.first);
        w.field(win.validation.last).field(win.test.first).field(win.test.last);
        w.end_row();
    }
}

// ---------------------------------------------------------------------------
// Tick matching

struct OptionTrade {
    std::int64_t timestamp_us = 0;
    std::string contract;
    double price = 0.0;
    double volume = 0.0;
};

struct UnderlyingTick {
    std::int64_t timestamp_us = 0;
    double price = 0.0;
    double volume = 0.0;
};

struct TickHorizon {
    enum class Unit { hours, business_days };
    Unit unit = Unit::business_days;
    int count = 1;

    double years() const {
        return unit == Unit::hours ? count / 24.0 * kDayFraction : count * kDayFraction;
    }
};

inline constexpr std::int64_t kMicrosPerMinute = 60'000'000;
inline constexpr std::int64_t kMicrosPerDay = 86'400'000'000;

/// Timestamp shifted by the horizon; business days skip weekends and keep the
/// time of day.
inline std::int64_t advance(std::int64_t ts_us, const TickHorizon& h) {
    if (h.unit == TickHorizon::Unit::hours) return ts_us + h.count * 60 * kMicrosPerMinute;
    std::int64_t day = ts_us >= 0 ? ts_us / kMicrosPerDay : -((-ts_us + kMicrosPerDay - 1) / kMicrosPerDay);
    const std::int64_t tod = ts_us - day * kMicrosPerDay;
    Date d{std::chrono::days{day}};
    for (int i = 0; i < h.count;) {
        d += std::chrono::days{1};
        if (is_weekday(d)) ++i;
    }
    return d.time_since_epoch().count() * kMicrosPerDay + tod;
}

inline Date date_of_timestamp(std::int64_t ts_us) {
    std::int64_t day = ts_us >= 0 ? ts_us / kMicrosPerDay : -((-ts_us + kMicrosPerDay - 1) / kMicrosPerDay);
    return Date{std::chrono::days{day}};
}

struct MatchOptions {
    TickHorizon horizon{};
    double tolerance_minutes = 6.0;
    double r_onr = 0.0;
    double r = 0.0;
};

struct MatchReport {
    std::int64_t trades_in = 0;        ///< after aggregation of simultaneous trades
    std::int64_t matched = 0;
    std::int64_t no_next_trade = 0;
    std::int64_t no_underlying = 0;
    std::int64_t unknown_contract = 0;
    std::int64_t expired = 0;
};

namespace detail {

template <typename T, typename Key>
std::vector<T> aggregate_vwap(const std::vector<T>& in, Key key) {
    std::vector<T> out;
    for (const auto& x : in) {
        if (!out.empty() && key(out.back()) == key(x)) {
            auto& agg = out.back();
            const double vol = agg.volume + x.volume;
            agg.price = vol > 0.0 ? (agg.price * agg.volume + x.price * x.volume) / vol
                                  : 0.5 * (agg.price + x.price);
            agg.volume = vol;
        } else {
            out.push_back(x);
        }
    }
    return out;
}

} // namespace detail

/// Pairs every option trade with the most recent underlying price and with
/// the first trade of the same contract inside [t + horizon, t + horizon +
/// tolerance]. Trades without such a partner are dropped and counted.
inline std::pair<SampleTable, MatchReport> match_ticks(const std::vector<OptionTrade>& trades_in,
                                                       const std::vector<UnderlyingTick>& ticks_in,
                                                       const std::vector<OptionContract>& contracts,
                                                       const MatchOptions& opt) {
    for (std::size_t i = 1; i < trades_in.size(); ++i)
        if (trades_in[i].timestamp_us < trades_in[i - 1].timestamp_us)
            throw InputError("match_ticks: option trades are not sorted by timestamp");
    for (std::size_t i = 1; i < ticks_in.size(); ++i)
        if (ticks_in[i].timestamp_us < ticks_in[i - 1].timestamp_us)
            throw InputError("match_ticks: underlying ticks are not sorted by timestamp");

    // Simultaneous trades of one contract: volume-weighted price.
    std::vector<OptionTrade> trades = trades_in;
    std::stable_sort(trades.begin(), trades.end(), [](const auto& a, const auto& b) {
        if (a.timestamp_us != b.timestamp_us) return a.timestamp_us < b.timestamp_us;
        return a.contract < b.contract;
    });
    trades = detail::aggregate_vwap(trades, [](const OptionTrade& t) { return std::make_pair(t.timestamp_us, t.contract); });
    const auto ticks = detail::aggregate_vwap(ticks_in, [](const UnderlyingTick& t) { return t.timestamp_us; });

    std::unordered_map<std::string, const OptionContract*> by_id;
    for (const auto& c : contracts) by_id[c.id] = &c;
    std::unordered_map<std::string, std::vector<std::size_t>> per_contract;
    for (std::size_t i = 0; i < trades.size(); ++i) per_contract[trades[i].contract].push_back(i);

    auto underlying_at = [&](std::int64_t ts) -> std::optional<double> {
        auto it = std::upper_bound(ticks.begin(), ticks.end(), ts,
                                   [](std::int64_t v, const UnderlyingTick& t) { return v < t.timestamp_us; });
        if (it == ticks.begin()) return std::nullopt;
        return std::prev(it)->price;
    };

    MatchReport report;
    report.trades_in = static_cast<std::int64_t>(trades.size());
    SampleTable out;
    if (trades.empty()) return {out, report};
    Date first = date_of_timestamp(trades.front().timestamp_us);
    while (!is_weekday(first)) first += std::chrono::days{1};
    const TradingCalendar calendar(first);
    const auto tol_us = static_cast<std::int64_t>(std::llround(opt.tolerance_minutes * kMicrosPerMinute));

    for (std::size_t i = 0; i < trades.size(); ++i) {
        const auto& tr = trades[i];
        auto cit = by_id.find(tr.contract);
        if (cit == by_id.end()) {
            ++report.unknown_contract;
            continue;
        }
        const OptionContract& c = *cit->second;
        const std::int64_t target = advance(tr.timestamp_us, opt.horizon);
        const auto& idx = per_contract[tr.contract];
        auto nit = std::lower_bound(idx.begin(), idx.end(), target,
                                    [&](std::size_t j, std::int64_t v) { return trades[j].timestamp_us < v; });
        if (nit == idx.end() || trades[*nit].timestamp_us > target + tol_us) {
            ++report.no_next_trade;
            continue;
        }
        const auto& next = trades[*nit];
        const auto s0 = underlying_at(tr.timestamp_us);
        const auto s1 = underlying_at(next.timestamp_us);
        if (!s0 || !s1) {
            ++report.no_underlying;
            continue;
        }
        const Date d = date_of_timestamp(tr.timestamp_us);
        if (!is_weekday(d) || d > c.expiry) {
            ++report.expired;
            continue;
        }
        const std::int64_t days_left = calendar.day_of(c.expiry) - calendar.day_of(d);
        Sample s;
        s.day = calendar.day_of(d);
        s.date = d;
        s.contract = c.id;
        s.cp_flag = c.kind == OptionKind::put ? 1 : 0;
        s.strike = c.strike;
        s.S0 = *s0;
        s.S1 = *s1;
        s.C0 = tr.price;
        s.C1 = next.price;
        s.volume = tr.volume;
        s.tau = static_cast<double>(days_left) * kDayFraction;
        s.r = opt.r;
        s.r_onr = opt.r_onr;
        s.delta_t = opt.horizon.years();
        s.moneyness = s.S0 / c.strike;
        if (s.tau > 0.0) {
            try {
                const double iv = implied_vol(s.C0, s.S0, c.strike, s.tau, opt.r, c.kind).sigma_impl;
                const BsQuote q = bs_greeks(s.S0, c.strike, s.tau, iv, opt.r, c.kind);
                s.sqrt_total_implied_variance = iv * std::sqrt(s.tau);
                s.delta_bs = q.delta;
                s.vega_bs = q.vega;
                s.gamma_bs = q.gamma;
                s.vanna_bs = q.vanna;
            } catch (const Error&) {
                // left as NaN; removed by the implied-volatility cleaning rule
            }
            const double tau1 = s.tau - s.delta_t;
            if (tau1 > 0.0) {
                try {
                    s.iv1 = implied_vol(s.C1, s.S1, c.strike, tau1, opt.r, c.kind).sigma_impl;
                } catch (const Error&) {
                }
            }
        }
        s.index = static_cast<std::int64_t>(out.size());
        ++report.matched;
        out.push_back(std::move(s));
    }
    return {std::move(out), report};
}

inline std::vector<OptionTrade> read_trades_csv(std::istream& is, std::string_view source = "trades.csv") {
    auto t = csv::Table::read(is, source);
    const auto c_ts = t.column("timestamp"), c_id = t.column("contract"), c_p = t.column("price"),
               c_v = t.column("volume");
    std::vector<OptionTrade> out;
    for (std::size_t r = 0; r < t.size(); ++r)
        out.push_back({t.integer(r, c_ts), t.at(r, c_id), t.number(r, c_p), t.number(r, c_v)});
    return out;
}

inline std::vector<UnderlyingTick> read_underlying_csv(std::istream& is, std::string_view source = "underlying.csv") {
    auto t = csv::Table::read(is, source);
    const auto c_ts = t.column("timestamp"), c_p = t.column("price"), c_v = t.column("volume");
    std::vector<UnderlyingTick> out;
    for (std::size_t r = 0; r < t.size(); ++r) out.push_back({t.integer(r, c_ts), t.number(r, c_p), t.number(r, c_v)});
    return out;
}

} // namespace deltabench
