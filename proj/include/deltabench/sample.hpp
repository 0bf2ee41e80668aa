#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "calendar.hpp"
#include "csv.hpp"
#include "listings.hpp"

namespace deltabench {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One option observed on one date, with its end-of-period price as target.
struct Sample {
    std::int64_t index = 0;
    std::int64_t day = 0;  ///< trading-day index
    Date date{};
    std::string contract;

    // features
    double sqrt_total_implied_variance = kNaN;  ///< sigma_impl * sqrt(tau)
    double moneyness = kNaN;                    ///< S0 / K
    double delta_bs = kNaN;                     ///< put delta for puts
    double vega_bs = kNaN;
    double gamma_bs = kNaN;
    double vanna_bs = kNaN;

    // additional information
    double S0 = kNaN;
    double S1 = kNaN;
    double C0 = kNaN;
    double r_onr = 0.0;
    int cp_flag = 0;  ///< 1 put, 0 call
    double tau = kNaN;   ///< years to expiry at the start of the period
    double r = 0.0;
    double strike = kNaN;
    double delta_t = kNaN;  ///< period length in years
    double Y0 = kNaN;       ///< Heston instantaneous variance (simulated Heston data only)
    double iv1 = kNaN;      ///< implied volatility at the end of the period
    double atm_strike = kNaN;  ///< one-month ATM call used as a second hedge instrument
    double atm_C0 = kNaN;
    double atm_C1 = kNaN;
    double bid = kNaN;  ///< quote data only
    double ask = kNaN;
    double volume = kNaN;

    // target
    double C1 = kNaN;

    OptionKind kind() const { return cp_flag == 1 ? OptionKind::put : OptionKind::call; }
    double sigma_impl() const { return sqrt_total_implied_variance / std::sqrt(tau); }
    double growth() const { return 1.0 + r_onr * delta_t; }  ///< R = 1 + r_onr * dt
};

using SampleTable = std::vector<Sample>;

enum class CpClass { calls, puts, both };

inline const char* to_string(CpClass c) {
    switch (c) {
        case CpClass::calls: return "calls";
        case CpClass::puts: return "puts";
        default: return "both";
    }
}

inline bool in_class(const Sample& s, CpClass c) {
    return c == CpClass::both || (c == CpClass::puts) == (s.cp_flag == 1);
}

inline SampleTable filter_class(const SampleTable& table, CpClass c) {
    SampleTable out;
    for (const auto& s : table)
        if (in_class(s, c)) out.push_back(s);
    return out;
}

inline const std::vector<std::string>& sample_columns() {
    static const std::vector<std::string> cols = {
        "index", "date", "day", "contract",
        "sqrt_total_implied_variance", "moneyness", "delta_bs", "vega_bs", "gamma_bs", "vanna_bs",
        "S0", "S1", "C0", "r_onr", "cp_flag", "tau", "r", "strike", "delta_t", "Y0", "iv1",
        "atm_strike", "atm_C0", "atm_C1", "bid", "ask", "volume", "C1"};
    return cols;
}

inline void write_samples_csv(std::ostream& os, const SampleTable& table) {
    csv::Writer w(os);
    w.header(sample_columns());
    for (const auto& s : table) {
        w.field(s.index).field(format_date(s.date)).field(s.day).field(s.contract);
        w.field(s.sqrt_total_implied_variance).field(s.moneyness).field(s.delta_bs).field(s.vega_bs);
        w.field(s.gamma_bs).field(s.vanna_bs);
        w.field(s.S0).field(s.S1).field(s.C0).field(s.r_onr).field(s.cp_flag).field(s.tau).field(s.r);
        w.field(s.strike).field(s.delta_t).field(s.Y0).field(s.iv1);
        w.field(s.atm_strike).field(s.atm_C0).field(s.atm_C1).field(s.bid).field(s.ask).field(s.volume);
        w.field(s.C1);
        w.end_row();
    }
}

/// Reads a sample table. Only the Table-1 columns are mandatory; the
/// optional ones default to NaN when absent.
inline SampleTable read_samples_csv(std::istream& is, std::string_view source = "samples.csv") {
    auto t = csv::Table::read(is, source);
    auto opt = [&](const char* name) -> std::ptrdiff_t {
        return t.has(name) ? static_cast<std::ptrdiff_t>(t.column(name)) : -1;
    };
    const auto c_date = t.column("date");
    const auto c_sigtau = t.column("sqrt_total_implied_variance"), c_m = t.column("moneyness"),
               c_delta = t.column("delta_bs"), c_vega = t.column("vega_bs"), c_s0 = t.column("S0"),
               c_s1 = t.column("S1"), c_c0 = t.column("C0"), c_ronr = t.column("r_onr"),
               c_cp = t.column("cp_flag"), c_c1 = t.column("C1");
    const auto c_index = opt("index"), c_day = opt("day"), c_contract = opt("contract"), c_gamma = opt("gamma_bs"),
               c_vanna = opt("vanna_bs"), c_tau = opt("tau"), c_r = opt("r"), c_strike = opt("strike"),
               c_dt = opt("delta_t"), c_y0 = opt("Y0"), c_iv1 = opt("iv1"), c_atmk = opt("atm_strike"),
               c_atm0 = opt("atm_C0"), c_atm1 = opt("atm_C1"), c_bid = opt("bid"), c_ask = opt("ask"),
               c_vol = opt("volume");
    auto num = [&](std::size_t r, std::ptrdiff_t c, double fallback = kNaN) {
        return c < 0 ? fallback : t.number(r, static_cast<std::size_t>(c));
    };
    SampleTable out;
    out.reserve(t.size());
    std::int64_t first_day_fallback = 0;
    for (std::size_t r = 0; r < t.size(); ++r) {
        Sample s;
        s.index = c_index < 0 ? static_cast<std::int64_t>(r) : t.integer(r, static_cast<std::size_t>(c_index));
        s.date = parse_date(t.at(r, c_date));
        s.day = c_day < 0 ? first_day_fallback : t.integer(r, static_cast<std::size_t>(c_day));
        if (c_contract >= 0) s.contract = t.at(r, static_cast<std::size_t>(c_contract));
        s.sqrt_total_implied_variance = t.number(r, c_sigtau);
        s.moneyness = t.number(r, c_m);
        s.delta_bs = t.number(r, c_delta);
        s.vega_bs = t.number(r, c_vega);
        s.gamma_bs = num(r, c_gamma);
        s.vanna_bs = num(r, c_vanna);
        s.S0 = t.number(r, c_s0);
        s.S1 = t.number(r, c_s1);
        s.C0 = t.number(r, c_c0);
        s.r_onr = t.number(r, c_ronr);
        const auto cp = t.integer(r, c_cp);
        if (cp != 0 && cp != 1) throw InputError(std::string(source) + ": cp_flag must be 0 or 1");
        s.cp_flag = static_cast<int>(cp);
        s.tau = num(r, c_tau);
        s.r = num(r, c_r, 0.0);
        s.strike = num(r, c_strike);
        s.delta_t = num(r, c_dt, kDayFraction);
        s.Y0 = num(r, c_y0);
        s.iv1 = num(r, c_iv1);
        s.atm_strike = num(r, c_atmk);
        s.atm_C0 = num(r, c_atm0);
        s.atm_C1 = num(r, c_atm1);
        s.bid = num(r, c_bid);
        s.ask = num(r, c_ask);
        s.volume = num(r, c_vol);
        s.C1 = t.number(r, c_c1);
        out.push_back(std::move(s));
    }
    if (c_day < 0 && !out.empty()) {
        // Without a day column, number distinct dates in order of appearance.
        Date prev = out.front().date;
        std::int64_t day = 0;
        for (auto& s : out) {
            if (s.date != prev) {
                ++day;
                prev = s.date;
            }
            s.day = day;
        }
    }
    return out;
}

} // namespace deltabench
