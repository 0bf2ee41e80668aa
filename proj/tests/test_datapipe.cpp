#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "deltabench/datapipe.hpp"

using namespace deltabench;

namespace {

Sample make_sample(double M, OptionKind kind, double tau = 0.25, double sigma = 0.2) {
    Sample s;
    s.S0 = 100.0;
    s.strike = 100.0 / M;
    s.moneyness = M;
    s.tau = tau;
    s.cp_flag = kind == OptionKind::put ? 1 : 0;
    const auto q = bs_greeks(s.S0, s.strike, tau, sigma, 0.0, kind);
    s.C0 = q.price;
    s.sqrt_total_implied_variance = sigma * std::sqrt(tau);
    s.delta_bs = q.delta;
    s.vega_bs = q.vega;
    s.gamma_bs = q.gamma;
    s.vanna_bs = q.vanna;
    s.S1 = 100.5;
    s.C1 = tau > kDayFraction ? bs_price(s.S1, s.strike, tau - kDayFraction, sigma, 0.0, kind)
                              : detail::intrinsic(s.S1, s.strike, kind);
    s.delta_t = kDayFraction;
    return s;
}

std::vector<std::int64_t> day_range(std::int64_t n) {
    std::vector<std::int64_t> d(static_cast<std::size_t>(n));
    std::iota(d.begin(), d.end(), 0);
    return d;
}

std::int64_t ts(Date d, int hour, int minute) {
    return d.time_since_epoch().count() * kMicrosPerDay + (hour * 60 + minute) * kMicrosPerMinute;
}

struct TickFixture {
    Date monday = make_date(2018, 1, 8);
    Date tuesday = make_date(2018, 1, 9);
    std::vector<OptionContract> contracts;
    std::vector<UnderlyingTick> ticks;

    TickFixture() {
        OptionContract c;
        c.id = "C20180323K2000";
        c.kind = OptionKind::call;
        c.strike = 2000.0;
        c.expiry = make_date(2018, 3, 23);
        contracts.push_back(c);
        ticks = {{ts(monday, 14, 0), 1990.0, 1.0}, {ts(tuesday, 14, 0), 1995.0, 1.0}};
    }

    std::vector<OptionTrade> trades(int next_minute) const {
        return {{ts(monday, 14, 12), contracts[0].id, 60.0, 3.0},
                {ts(tuesday, 14, next_minute), contracts[0].id, 62.0, 1.0}};
    }
};

} // namespace

TEST(BuildSamples, BlackScholesImpliedVolIsModelSigma) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, 40, 3);
    const auto u = generate_option_universe(path, cal);
    const auto built = build_samples(path, u.contracts, BsPricing{0.2}, cal);
    ASSERT_FALSE(built.table.empty());
    for (const auto& s : built.table) {
        EXPECT_NEAR(s.sigma_impl(), 0.2, 1e-8);
        EXPECT_EQ(s.C0, bs_price(s.S0, s.strike, s.tau, 0.2, 0.0, s.kind()));
        EXPECT_EQ(s.S1, path.spot_on(s.day + 1));
    }
}

TEST(BuildSamples, HorizonLongerThanRemainingLifeDropsRow) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, 40, 3);
    const auto u = generate_option_universe(path, cal);
    BuildOptions opt;
    opt.horizon_days = 2;
    const auto built = build_samples(path, u.contracts, BsPricing{}, cal, opt);
    std::map<std::string, std::int64_t> last;
    for (const auto& c : u.contracts) last[c.id] = c.last_day;
    for (const auto& s : built.table) EXPECT_GE(last[s.contract] - s.day, 2);
    EXPECT_GT(built.dropped_horizon, 0);
    // The January expiry (day 18) has a row on day 16 but not on day 17.
    bool saw16 = false, saw17 = false;
    for (const auto& s : built.table) {
        if (last[s.contract] != 18) continue;
        saw16 |= s.day == 16;
        saw17 |= s.day == 17;
    }
    EXPECT_TRUE(saw16);
    EXPECT_FALSE(saw17);
}

TEST(BuildSamples, AtMostOneRowPerContractAndDay) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, 120, 9);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    const auto built = build_samples(path, u.contracts, BsPricing{}, cal, opt);
    std::set<std::pair<std::string, std::int64_t>> seen;
    std::map<std::string, int> per_contract;
    for (const auto& s : built.table) {
        EXPECT_TRUE(seen.insert({s.contract, s.day}).second);
        ++per_contract[s.contract];
    }
    for (const auto& c : u.contracts) {
        if (!per_contract.count(c.id)) continue;
        int in_range = 0;
        for (std::int64_t d = c.first_day; d < c.last_day && d < path.last_day(); ++d) {
            const double M = path.spot_on(d) / c.strike;
            if (M >= 0.8 && M <= 1.5) ++in_range;
        }
        EXPECT_LE(per_contract[c.id], in_range);
    }
    EXPECT_EQ(built.report.input, built.report.total_removed() + built.report.retained());
    EXPECT_EQ(static_cast<std::int64_t>(built.table.size()), built.report.retained());
}

TEST(BuildSamples, PrefilterMatchesPostCleaning) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, 60, 4);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    const auto pre = build_samples(path, u.contracts, BsPricing{}, cal, opt);
    const auto raw = build_samples(path, u.contracts, BsPricing{}, cal);
    const auto [post, report] = clean(raw.table, rules);
    ASSERT_EQ(pre.table.size(), post.size());
    for (std::size_t i = 0; i < post.size(); ++i) {
        EXPECT_EQ(pre.table[i].contract, post[i].contract);
        EXPECT_EQ(pre.table[i].day, post[i].day);
    }
    EXPECT_EQ(pre.report.removed, report.removed);
}

TEST(BuildSamples, HestonNeedsVariance) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, 10, 3);
    EXPECT_THROW(build_samples(path, {}, HestonPricing{}, cal), InputError);
}

TEST(BuildSamples, HestonRowsCarryInvertedVolAndVariance) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_heston({}, 8, 10, Scheme::milstein, 5);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    const auto built = build_samples(path, u.contracts, HestonPricing{}, cal, opt);
    ASSERT_FALSE(built.table.empty());
    for (const auto& s : built.table) {
        EXPECT_EQ(s.Y0, path.variance_on(s.day));
        EXPECT_NEAR(bs_price(s.S0, s.strike, s.tau, s.sigma_impl(), 0.0, s.kind()), s.C0, 1e-8);
        EXPECT_TRUE(std::isfinite(s.atm_C0));
        EXPECT_TRUE(std::isfinite(s.atm_C1));
    }
}

TEST(Cleaning, Examples) {
    const CleaningRules rules;
    const auto keep = make_sample(0.95, OptionKind::call);
    auto far = make_sample(1.6, OptionKind::put);
    auto quote = make_sample(0.95, OptionKind::call);
    quote.bid = 0.04;
    quote.ask = 0.06;
    quote.volume = 10.0;
    EXPECT_FALSE(first_violation(keep, rules).has_value());
    EXPECT_EQ(first_violation(far, rules), CleanRule::moneyness);
    EXPECT_EQ(first_violation(quote, rules), CleanRule::min_bid);

    const auto [out, report] = clean({keep, far, quote}, rules);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(report.removed.at(CleanRule::moneyness), 1);
    EXPECT_EQ(report.removed.at(CleanRule::min_bid), 1);
    EXPECT_EQ(report.retained_calls, 1);
}

TEST(Cleaning, IndividualRules) {
    const CleaningRules rules;
    EXPECT_EQ(first_violation(make_sample(1.05, OptionKind::call), rules), CleanRule::otm_only);
    EXPECT_EQ(first_violation(make_sample(0.95, OptionKind::put), rules), CleanRule::otm_only);
    EXPECT_FALSE(first_violation(make_sample(1.0, OptionKind::put), rules).has_value());
    EXPECT_EQ(first_violation(make_sample(0.95, OptionKind::call, 0.5 * kDayFraction), rules), CleanRule::tau_min);
    EXPECT_EQ(first_violation(make_sample(0.95, OptionKind::call, 0.25, 1.2), rules), CleanRule::implied_vol);

    auto cheap = make_sample(0.8, OptionKind::call, 5 * kDayFraction);
    cheap.C0 = 0.005;
    EXPECT_EQ(first_violation(cheap, rules), CleanRule::min_price);

    auto missing = make_sample(0.95, OptionKind::call);
    missing.C1 = kNaN;
    EXPECT_EQ(first_violation(missing, rules), CleanRule::missing_next);

    CleaningRules with_itm;
    with_itm.otm_only = false;
    auto below = make_sample(0.9, OptionKind::put);
    below.C0 = 0.5 * (below.strike - below.S0);
    EXPECT_EQ(first_violation(below, with_itm), CleanRule::negative_time_value);

    auto wide = make_sample(0.95, OptionKind::call);
    wide.bid = 1.0;
    wide.ask = 2.0;
    EXPECT_EQ(first_violation(wide, rules), CleanRule::wide_spread);

    auto idle = make_sample(0.95, OptionKind::call);
    idle.volume = 0.0;
    EXPECT_EQ(first_violation(idle, rules), CleanRule::zero_volume);

    CleaningRules short_filter;
    short_filter.tau_filter_calendar_days = 14.0;
    EXPECT_EQ(first_violation(make_sample(0.95, OptionKind::call, 10 * kDayFraction), short_filter),
              CleanRule::tau_filter);  // 14 calendar days
    EXPECT_FALSE(first_violation(make_sample(0.95, OptionKind::call, 11 * kDayFraction), short_filter).has_value());
}

TEST(Cleaning, OrderIndependentIdempotentAndConserving) {
    Rng rng(12);
    SampleTable table;
    for (int i = 0; i < 2000; ++i) {
        const auto kind = rng.uniform() < 0.5 ? OptionKind::call : OptionKind::put;
        auto s = make_sample(0.7 + 0.9 * rng.uniform(), kind, (0.5 + 60.0 * rng.uniform()) * kDayFraction,
                             0.005 + 1.1 * rng.uniform());
        if (rng.uniform() < 0.1) s.C1 = kNaN;
        if (rng.uniform() < 0.3) {
            s.bid = 0.1 * rng.uniform();
            s.ask = s.bid * (1.0 + 1.5 * rng.uniform());
            s.volume = std::floor(3.0 * rng.uniform());
        }
        s.index = i;
        table.push_back(s);
    }
    CleaningRules all;
    all.tau_filter_calendar_days = 14.0;
    const auto [reference, report] = clean(table, all);
    EXPECT_EQ(report.input, report.total_removed() + report.retained());
    EXPECT_EQ(static_cast<std::int64_t>(reference.size()), report.retained());
    EXPECT_GT(report.total_removed(), 0);
    EXPECT_GT(report.retained(), 0);

    // Each group of rules applied alone, in several random orders.
    std::vector<CleaningRules> singles;
    auto none = [] {
        CleaningRules r;
        r.tau_min = r.moneyness = r.otm_only = r.missing_next = r.min_price = r.negative_time_value =
            r.implied_vol = r.quote_rules = false;
        return r;
    };
    for (int k = 0; k < 9; ++k) {
        auto r = none();
        switch (k) {
            case 0: r.tau_min = true; break;
            case 1: r.moneyness = true; break;
            case 2: r.otm_only = true; break;
            case 3: r.missing_next = true; break;
            case 4: r.min_price = true; break;
            case 5: r.negative_time_value = true; break;
            case 6: r.implied_vol = true; break;
            case 7: r.quote_rules = true; break;
            default: r.tau_filter_calendar_days = 14.0; break;
        }
        singles.push_back(r);
    }
    std::vector<std::size_t> order(singles.size());
    std::iota(order.begin(), order.end(), 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(order.begin(), order.end(), rng);
        SampleTable t = table;
        for (auto k : order) t = clean(t, singles[k]).first;
        ASSERT_EQ(t.size(), reference.size());
        for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i].index, reference[i].index);
    }

    const auto again = clean(reference, all);
    EXPECT_EQ(again.first.size(), reference.size());
    EXPECT_EQ(again.second.total_removed(), 0);

    for (const auto& s : reference) {
        EXPECT_GE(s.moneyness, 0.8);
        EXPECT_LE(s.moneyness, 1.5);
        EXPECT_GE(s.tau, kDayFraction * (1 - 1e-9));
        EXPECT_GE(s.sigma_impl(), 0.01);
        EXPECT_LE(s.sigma_impl(), 1.0);
    }
}

TEST(Cleaning, ReportCsv) {
    const auto [out, report] = clean({make_sample(1.6, OptionKind::put)}, CleaningRules{});
    std::ostringstream os;
    report.write_csv(os);
    EXPECT_NE(os.str().find("removed_moneyness_out_of_range,1"), std::string::npos);
    EXPECT_NE(os.str().find("retained_puts,0"), std::string::npos);
}

TEST(Normalize, ScalesPrices) {
    Sample s = make_sample(0.95, OptionKind::call);
    s.S0 = 2000.0;
    s.C0 = 40.04;
    s.strike = 2100.0;
    s.vega_bs = 400.0;
    s.gamma_bs = 0.001;
    const auto n = normalize(s);
    EXPECT_DOUBLE_EQ(n.S0, 100.0);
    EXPECT_NEAR(n.C0, 2.002, 1e-12);
    EXPECT_NEAR(n.strike, 105.0, 1e-12);
    EXPECT_NEAR(n.vega_bs, 20.0, 1e-12);
    EXPECT_NEAR(n.gamma_bs, 0.02, 1e-12);
    EXPECT_EQ(n.delta_bs, s.delta_bs);
    EXPECT_EQ(n.vanna_bs, s.vanna_bs);
    EXPECT_EQ(n.moneyness, s.moneyness);
}

TEST(Normalize, IdempotentAndFixedPoint) {
    Sample s = make_sample(0.97, OptionKind::call);
    s.S0 = 1873.0;
    const auto once = normalize(s);
    const auto twice = normalize(once);
    EXPECT_EQ(once.C0, twice.C0);
    EXPECT_EQ(once.C1, twice.C1);
    EXPECT_EQ(once.S1, twice.S1);
    EXPECT_EQ(once.vega_bs, twice.vega_bs);

    Sample row;
    row.S0 = 100.0;
    row.C0 = 2.002;
    row.delta_bs = 0.531;
    const auto fixed = normalize(row);
    EXPECT_EQ(fixed.C0, 2.002);
    EXPECT_EQ(fixed.delta_bs, 0.531);
    Sample bad;
    bad.S0 = 0.0;
    EXPECT_THROW(normalize(bad), InputError);
}

TEST(Normalize, ConsistentWithBlackScholesScaling) {
    const auto q = bs_greeks(2000.0, 2100.0, 0.3, 0.2, 0.0, OptionKind::call);
    const auto r = bs_greeks(100.0, 105.0, 0.3, 0.2, 0.0, OptionKind::call);
    Sample s;
    s.S0 = 2000.0;
    s.C0 = q.price;
    s.vega_bs = q.vega;
    s.gamma_bs = q.gamma;
    const auto n = normalize(s);
    EXPECT_NEAR(n.C0, r.price, 1e-12);
    EXPECT_NEAR(n.vega_bs, r.vega, 1e-10);
    EXPECT_NEAR(n.gamma_bs, r.gamma, 1e-14);
}

TEST(SplitWindows, RollingCounts) {
    EXPECT_EQ(split_days(day_range(1080), RollingMode{}).size(), 1u);
    const auto w = split_days(day_range(3420), RollingMode{});
    ASSERT_EQ(w.size(), 14u);
    for (const auto& s : w) {
        EXPECT_EQ(s.train.count(), 720);
        EXPECT_EQ(s.validation.count(), 180);
        EXPECT_EQ(s.test.count(), 180);
    }
    EXPECT_EQ(w[1].train.first, 180);
    EXPECT_THROW(split_days(day_range(1079), RollingMode{}), ConfigError);
}

TEST(SplitWindows, SingleMode) {
    const auto w = split_days(day_range(3420), SingleMode{});
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].train.count(), 2280);
    EXPECT_EQ(w[0].validation.count(), 570);
    EXPECT_EQ(w[0].test.count(), 570);
    EXPECT_THROW(split_days(day_range(5), SingleMode{}), ConfigError);
}

TEST(SplitWindows, SimulationMode) {
    const auto w = split_days(day_range(449), SimulationMode{});
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].train.count(), 360);
    EXPECT_EQ(w[0].validation.first, 360);
    EXPECT_EQ(w[0].validation.last, 448);
    EXPECT_EQ(w[0].test.first, 450);
    EXPECT_EQ(w[0].test.count(), 90);
}

TEST(SplitWindows, ChronologicalIntegrityWithGaps) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> days;
        std::int64_t d = 0;
        while (days.size() < 1500) {
            days.push_back(d);
            d += 1 + static_cast<std::int64_t>(rng.uniform() < 0.1 ? 5 : 0);
        }
        for (const SplitMode& mode : {SplitMode{RollingMode{}}, SplitMode{SingleMode{}}}) {
            for (const auto& w : split_days(days, mode)) {
                EXPECT_LT(w.train.last, w.validation.first);
                EXPECT_LT(w.validation.last, w.test.first);
                EXPECT_LE(w.train.first, w.train.last);
                std::int64_t nt = 0, nv = 0, ne = 0;
                for (auto x : days) {
                    nt += w.train.contains(x);
                    nv += w.validation.contains(x);
                    ne += w.test.contains(x);
                }
                if (std::holds_alternative<RollingMode>(mode)) {
                    EXPECT_EQ(nt, 720);
                    EXPECT_EQ(nv, 180);
                    EXPECT_EQ(ne, 180);
                } else {
                    EXPECT_EQ(nt + nv + ne, static_cast<std::int64_t>(days.size()));
                    EXPECT_EQ(nt, 4 * nv);
                }
            }
        }
    }
}

TEST(SplitWindows, SelectDaysByRange) {
    SampleTable t;
    for (int d = 0; d < 10; ++d) {
        Sample s;
        s.day = d;
        t.push_back(s);
        t.push_back(s);
    }
    const auto w = split_windows(t, SingleMode{});
    EXPECT_EQ(select_days(t, w[0].train).size(), 12u);
    EXPECT_EQ(select_days(t, w[0].validation).size(), 2u);
    EXPECT_EQ(select_days(t, w[0].test).size(), 6u);
}

TEST(MatchTicks, WithinToleranceMatched) {
    const TickFixture f;
    MatchOptions opt;
    const auto [table, report] = match_ticks(f.trades(15), f.ticks, f.contracts, opt);
    ASSERT_EQ(report.matched, 1);
    ASSERT_EQ(table.size(), 1u);
    EXPECT_EQ(table[0].C0, 60.0);
    EXPECT_EQ(table[0].C1, 62.0);
    EXPECT_EQ(table[0].S0, 1990.0);
    EXPECT_EQ(table[0].S1, 1995.0);
    EXPECT_EQ(table[0].date, f.monday);
    EXPECT_NEAR(table[0].delta_t, kDayFraction, 1e-15);
    EXPECT_TRUE(std::isfinite(table[0].delta_bs));
}

TEST(MatchTicks, OutsideToleranceDropped) {
    const TickFixture f;
    const auto [table, report] = match_ticks(f.trades(19), f.ticks, f.contracts, MatchOptions{});
    EXPECT_TRUE(table.empty());
    EXPECT_EQ(report.no_next_trade, 2);  // neither trade finds a partner
}

TEST(MatchTicks, WiderToleranceMatches) {
    const TickFixture f;
    MatchOptions opt;
    opt.tolerance_minutes = 30.0;
    const auto [table, report] = match_ticks(f.trades(19), f.ticks, f.contracts, opt);
    EXPECT_EQ(report.matched, 1);
}

TEST(MatchTicks, FridayRollsToMonday) {
    TickFixture f;
    const Date friday = make_date(2018, 1, 12), monday = make_date(2018, 1, 15);
    f.ticks = {{ts(friday, 10, 0), 2000.0, 1.0}};
    const std::vector<OptionTrade> trades = {{ts(friday, 14, 12), f.contracts[0].id, 60.0, 1.0},
                                             {ts(monday, 14, 13), f.contracts[0].id, 61.0, 1.0}};
    EXPECT_EQ(match_ticks(trades, f.ticks, f.contracts, MatchOptions{}).second.matched, 1);
}

TEST(MatchTicks, HourHorizon) {
    TickFixture f;
    MatchOptions opt;
    opt.horizon = {TickHorizon::Unit::hours, 1};
    const std::vector<OptionTrade> trades = {{ts(f.monday, 14, 12), f.contracts[0].id, 60.0, 1.0},
                                             {ts(f.monday, 15, 14), f.contracts[0].id, 61.0, 1.0}};
    const auto [table, report] = match_ticks(trades, f.ticks, f.contracts, opt);
    ASSERT_EQ(report.matched, 1);
    EXPECT_NEAR(table[0].delta_t, kDayFraction / 24.0, 1e-15);
}

TEST(MatchTicks, SimultaneousTradesVolumeWeighted) {
    const TickFixture f;
    auto trades = f.trades(15);
    trades.insert(trades.begin() + 1, {ts(f.monday, 14, 12), f.contracts[0].id, 64.0, 1.0});
    const auto [table, report] = match_ticks(trades, f.ticks, f.contracts, MatchOptions{});
    ASSERT_EQ(table.size(), 1u);
    EXPECT_DOUBLE_EQ(table[0].C0, (60.0 * 3.0 + 64.0) / 4.0);
    EXPECT_DOUBLE_EQ(table[0].volume, 4.0);
}

TEST(MatchTicks, UnsortedInputIsAnError) {
    const TickFixture f;
    auto trades = f.trades(15);
    std::swap(trades[0], trades[1]);
    EXPECT_THROW(match_ticks(trades, f.ticks, f.contracts, MatchOptions{}), InputError);
    auto ticks = f.ticks;
    std::swap(ticks[0], ticks[1]);
    EXPECT_THROW(match_ticks(f.trades(15), ticks, f.contracts, MatchOptions{}), InputError);
}

TEST(MatchTicks, UnknownContractCounted) {
    const TickFixture f;
    auto trades = f.trades(15);
    for (auto& t : trades) t.contract = "X";
    const auto [table, report] = match_ticks(trades, f.ticks, f.contracts, MatchOptions{});
    EXPECT_TRUE(table.empty());
    EXPECT_EQ(report.unknown_contract, 2);
}

TEST(Moneyness, BucketsPartitionTable) {
    SampleTable t;
    for (double m : {0.8, 0.9, 0.95, 1.0, 1.05, 1.2, 1.5}) t.push_back(make_sample(m, OptionKind::call));
    const double th = moneyness_threshold(t);
    const auto [near, otm] = split_by_moneyness(t, th);
    EXPECT_EQ(near.size() + otm.size(), t.size());
    for (const auto& s : near) EXPECT_LE(std::abs(s.moneyness - 1.0), th);
    for (const auto& s : otm) EXPECT_GT(std::abs(s.moneyness - 1.0), th);
    EXPECT_GE(near.size(), 3u);
    EXPECT_GE(otm.size(), 3u);
}

TEST(SamplesCsv, RoundTrip) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_heston({}, 4, 10, Scheme::milstein, 2);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    auto table = build_samples(path, u.contracts, HestonPricing{}, cal, opt).table;
    normalize_table(table);
    std::stringstream ss;
    write_samples_csv(ss, table);
    const auto back = read_samples_csv(ss);
    ASSERT_EQ(back.size(), table.size());
    std::ostringstream a, b;
    write_samples_csv(a, table);
    write_samples_csv(b, back);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(back[0].C1, table[0].C1);
    EXPECT_EQ(back[0].Y0, table[0].Y0);
}
