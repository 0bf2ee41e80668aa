#pragma once

// Hedging-error statistics: normalized MSHE, relative improvements, daily
// pairwise intervals, leverage coefficients and bucket diagnostics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "hedgenet.hpp"
#include "hedgers.hpp"
#include "sample.hpp"

namespace deltabench {

/// Per-sample hedging errors 100 V / S0.
inline std::vector<double> hedging_errors(const SampleTable& table, const std::vector<HedgeRatio>& ratios) {
    if (ratios.size() != table.size()) throw EvaluationError("hedging_errors: one ratio per sample required");
    std::vector<double> e(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) e[i] = hedging_error(table[i], ratios[i].delta, ratios[i].eta);
    return e;
}

inline std::vector<double> hedging_errors(const SampleTable& table, const std::vector<double>& deltas) {
    if (deltas.size() != table.size()) throw EvaluationError("hedging_errors: one ratio per sample required");
    std::vector<double> e(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) e[i] = hedging_error(table[i], deltas[i]);
    return e;
}

inline std::vector<double> hedging_errors(const SampleTable& table, const HedgeModel& m) {
    return hedging_errors(table, hedge_ratios(m, table));
}

inline std::vector<double> hedging_errors(const SampleTable& table, const TrainedNet& net) {
    return hedging_errors(table, net_hedge_ratios(net, table));
}

struct MsheByClass {
    double calls = 0.0;
    double puts = 0.0;
    double both = 0.0;
    long n_calls = 0;
    long n_puts = 0;

    double get(CpClass c) const { return c == CpClass::calls ? calls : c == CpClass::puts ? puts : both; }
    long count(CpClass c) const {
        return c == CpClass::calls ? n_calls : c == CpClass::puts ? n_puts : n_calls + n_puts;
    }
};

/// Mean squared hedging error per class; a class without samples reports NaN.
inline MsheByClass mshe(const SampleTable& table, const std::vector<double>& errors) {
    if (table.empty()) throw EvaluationError("mshe: empty test table");
    if (errors.size() != table.size()) throw EvaluationError("mshe: one error per sample required");
    double sc = 0.0, sp = 0.0;
    MsheByClass out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double e2 = errors[i] * errors[i];
        if (table[i].cp_flag == 1) {
            sp += e2;
            ++out.n_puts;
        } else {
            sc += e2;
            ++out.n_calls;
        }
    }
    out.calls = out.n_calls ? sc / static_cast<double>(out.n_calls) : kNaN;
    out.puts = out.n_puts ? sp / static_cast<double>(out.n_puts) : kNaN;
    out.both = (sc + sp) / static_cast<double>(table.size());
    return out;
}

template <typename Hedge>
MsheByClass mshe(const SampleTable& table, const Hedge& hedge) {
    return mshe(table, hedging_errors(table, hedge));
}

/// (model - baseline) / baseline in percent; negative means outperformance.
inline double relative_improvement(double model_mshe, double baseline_mshe) {
    if (!(baseline_mshe > 0.0)) throw EvaluationError("relative_improvement: baseline MSHE must be positive");
    return 100.0 * (model_mshe - baseline_mshe) / baseline_mshe;
}

/// 1 / sqrt(1 - reduction)
inline double sharpe_factor(double relative_reduction) {
    if (!(relative_reduction >= 0.0) || !(relative_reduction < 1.0))
        throw ParameterError("sharpe_factor: reduction must lie in [0, 1)");
    return 1.0 / std::sqrt(1.0 - relative_reduction);
}

// ---------------------------------------------------------------------------
// Daily MSHE and pairwise intervals

struct DailyMshe {
    std::int64_t day = 0;
    long n = 0;
    double mshe = 0.0;
};

/// Cross-sectional MSHE of every day that has samples, in day order.
inline std::vector<DailyMshe> daily_mshe(const std::vector<std::int64_t>& days, const std::vector<double>& errors) {
    if (errors.size() != days.size()) throw EvaluationError("daily_mshe: one error per sample required");
    std::map<std::int64_t, std::pair<long, double>> acc;
    for (std::size_t i = 0; i < days.size(); ++i) {
        auto& a = acc[days[i]];
        ++a.first;
        a.second += errors[i] * errors[i];
    }
    std::vector<DailyMshe> out;
    for (const auto& [d, a] : acc) out.push_back({d, a.first, a.second / static_cast<double>(a.first)});
    return out;
}

inline std::vector<std::int64_t> sample_days(const SampleTable& table) {
    std::vector<std::int64_t> days(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) days[i] = table[i].day;
    return days;
}

inline std::vector<DailyMshe> daily_mshe(const SampleTable& table, const std::vector<double>& errors) {
    return daily_mshe(sample_days(table), errors);
}

struct PairwiseCI {
    std::string model_a;
    std::string model_b;
    double mean = 0.0;
    double std = 0.0;  ///< population standard deviation of the daily differences
    double lower = 0.0;
    double upper = 0.0;
    long days = 0;

    bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

/// mean(MSHE_t(a) - MSHE_t(b)) -/+ 2 std over the days with samples.
inline PairwiseCI pairwise_ci(const std::vector<std::int64_t>& days, const std::vector<double>& errors_a,
                              const std::vector<double>& errors_b, std::string name_a = "a",
                              std::string name_b = "b") {
    const auto da = daily_mshe(days, errors_a);
    const auto db = daily_mshe(days, errors_b);
    if (da.size() < 2) throw EvaluationError("pairwise_ci: at least two test days are required");
    std::vector<double> diff(da.size());
    for (std::size_t i = 0; i < da.size(); ++i) diff[i] = da[i].mshe - db[i].mshe;
    PairwiseCI ci;
    ci.model_a = std::move(name_a);
    ci.model_b = std::move(name_b);
    ci.days = static_cast<long>(diff.size());
    ci.mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(diff.size());
    double ss = 0.0;
    for (double d : diff) ss += (d - ci.mean) * (d - ci.mean);
    ci.std = std::sqrt(ss / static_cast<double>(diff.size()));
    ci.lower = ci.mean - 2.0 * ci.std;
    ci.upper = ci.mean + 2.0 * ci.std;
    return ci;
}

inline PairwiseCI pairwise_ci(const SampleTable& table, const std::vector<double>& errors_a,
                              const std::vector<double>& errors_b, std::string name_a = "a",
                              std::string name_b = "b") {
    return pairwise_ci(sample_days(table), errors_a, errors_b, std::move(name_a), std::move(name_b));
}

// ---------------------------------------------------------------------------
// Leverage coefficient

enum class MaturityBucket { under_1m, m1_to_6, over_6m };

inline const char* to_string(MaturityBucket b) {
    switch (b) {
        case MaturityBucket::under_1m: return "<1m";
        case MaturityBucket::m1_to_6: return "1-6m";
        case MaturityBucket::over_6m: return ">6m";
    }
    return "?";
}

inline MaturityBucket maturity_bucket(double tau) {
    if (tau < 1.0 / 12.0) return MaturityBucket::under_1m;
    if (tau <= 0.5) return MaturityBucket::m1_to_6;
    return MaturityBucket::over_6m;
}

struct LeverageRow {
    CpClass cp = CpClass::calls;
    MaturityBucket bucket = MaturityBucket::under_1m;
    double slope = 0.0;  ///< b from delta sigma_impl on delta S without intercept
    double lc = 0.0;
    long n = 0;
};

/// Samples without an end-of-period implied volatility are skipped.
inline LeverageRow leverage_coefficient(const SampleTable& train, CpClass cp, MaturityBucket bucket) {
    double sxy = 0.0, sxx = 0.0, ratio = 0.0;
    long n = 0;
    for (const auto& s : train) {
        if (!in_class(s, cp) || maturity_bucket(s.tau) != bucket) continue;
        const double dsig = s.iv1 - s.sigma_impl();
        const double ds = s.S1 - s.S0;
        if (!std::isfinite(dsig) || !std::isfinite(ds) || !std::isfinite(s.vega_bs / s.delta_bs)) continue;
        sxy += ds * dsig;
        sxx += ds * ds;
        ratio += s.vega_bs / s.delta_bs;
        ++n;
    }
    if (n == 0) throw EvaluationError(std::string("leverage_coefficient: empty bucket ") + to_string(bucket));
    LeverageRow row;
    row.cp = cp;
    row.bucket = bucket;
    row.n = n;
    row.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    row.lc = row.slope * ratio / static_cast<double>(n);
    return row;
}

inline std::vector<LeverageRow> leverage_report(const SampleTable& train) {
    std::vector<LeverageRow> out;
    for (CpClass cp : {CpClass::calls, CpClass::puts})
        for (MaturityBucket b : {MaturityBucket::under_1m, MaturityBucket::m1_to_6, MaturityBucket::over_6m}) {
            try {
                out.push_back(leverage_coefficient(train, cp, b));
            } catch (const EvaluationError&) {
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Bucket diagnostics

enum class BucketAxis { tau, vega };

inline const char* to_string(BucketAxis a) { return a == BucketAxis::tau ? "tau" : "vega"; }

struct DecileRow {
    int decile = 0;
    double axis_lo = 0.0;
    double axis_hi = 0.0;
    long n = 0;
    double mean_sq_relative_error = 0.0;  ///< mean of (V / C0)^2
    double standard_error = 0.0;
};

/// Deciles of `axis` (10% of the samples each) with the mean squared
/// relative error per decile and its standard error.
inline std::vector<DecileRow> bucket_diagnostics(const std::vector<double>& axis,
                                                 const std::vector<double>& relative_errors) {
    if (axis.empty()) throw EvaluationError("bucket_diagnostics: empty table");
    if (relative_errors.size() != axis.size())
        throw EvaluationError("bucket_diagnostics: one error per sample required");
    std::vector<std::size_t> order(axis.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return axis[a] < axis[b]; });
    const std::size_t n = order.size();
    std::vector<DecileRow> out;
    for (int k = 0; k < 10; ++k) {
        const std::size_t lo = n * static_cast<std::size_t>(k) / 10;
        const std::size_t hi = n * static_cast<std::size_t>(k + 1) / 10;
        DecileRow row;
        row.decile = k + 1;
        row.n = static_cast<long>(hi - lo);
        if (hi == lo) {
            row.axis_lo = row.axis_hi = row.mean_sq_relative_error = row.standard_error = kNaN;
            out.push_back(row);
            continue;
        }
        row.axis_lo = axis[order[lo]];
        row.axis_hi = axis[order[hi - 1]];
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += relative_errors[order[i]] * relative_errors[order[i]];
        const double m = sum / static_cast<double>(hi - lo);
        double ss = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double x = relative_errors[order[i]] * relative_errors[order[i]] - m;
            ss += x * x;
        }
        const auto cnt = static_cast<double>(hi - lo);
        row.mean_sq_relative_error = m;
        row.standard_error = hi - lo > 1 ? std::sqrt(ss / (cnt - 1.0) / cnt) : 0.0;
        out.push_back(row);
    }
    return out;
}

inline double axis_value(const Sample& s, BucketAxis axis) { return axis == BucketAxis::tau ? s.tau : s.vega_bs; }

/// V / C0 from the normalized hedging error 100 V / S0.
inline double relative_error(const Sample& s, double error) { return error * s.S0 / 100.0 / s.C0; }

inline std::vector<DecileRow> bucket_diagnostics(const SampleTable& table, const std::vector<double>& errors,
                                                 BucketAxis axis) {
    if (errors.size() != table.size()) throw EvaluationError("bucket_diagnostics: one error per sample required");
    std::vector<double> ax(table.size()), rel(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        ax[i] = axis_value(table[i], axis);
        rel[i] = relative_error(table[i], errors[i]);
    }
    return bucket_diagnostics(ax, rel);
}

inline void write_buckets_csv(std::ostream& os, const std::vector<std::tuple<std::string, int, BucketAxis, DecileRow>>& rows) {
    csv::Writer w(os);
    w.header({"model", "horizon_days", "axis", "decile", "axis_lo", "axis_hi", "n", "mean_sq_relative_error",
              "standard_error"});
    for (const auto& [model, h, axis, r] : rows) {
        w.field(model).field(h).field(std::string(to_string(axis))).field(r.decile).field(r.axis_lo);
        w.field(r.axis_hi).field(r.n).field(r.mean_sq_relative_error).field(r.standard_error);
        w.end_row();
    }
}

// ---------------------------------------------------------------------------
// Report

struct EvalRow {
    std::string window;  ///< window id or out-of-sample set
    std::string model;
    int horizon_days = 1;
    CpClass cp = CpClass::both;
    double mshe = 0.0;
    long n = 0;
    std::string subset = "all";  ///< moneyness bucket when bucketing is enabled
};

struct EvalReport {
    std::vector<EvalRow> rows;
    /// Aggregate windows by sample count (pooled MSHE) instead of a plain mean
    /// over out-of-sample sets.
    bool pooled = false;

    void add(const std::string& window, const std::string& model, int horizon, const MsheByClass& m,
             const std::string& subset = "all") {
        for (CpClass c : {CpClass::calls, CpClass::puts, CpClass::both})
            rows.push_back({window, model, horizon, c, m.get(c), m.count(c), subset});
    }

    /// One row per (subset, model, horizon, class), in first-seen order.
    std::vector<EvalRow> averaged() const {
        using Key = std::tuple<std::string, std::string, int, CpClass>;
        std::map<Key, std::pair<double, double>> acc;
        std::map<Key, long> counts;
        std::vector<Key> order;
        for (const auto& r : rows) {
            const Key k{r.subset, r.model, r.horizon_days, r.cp};
            if (!acc.count(k)) order.push_back(k);
            if (std::isfinite(r.mshe) && r.n > 0) {
                const double w = pooled ? static_cast<double>(r.n) : 1.0;
                acc[k].first += w * r.mshe;
                acc[k].second += w;
            }
            counts[k] += r.n;
        }
        std::vector<EvalRow> out;
        for (const auto& k : order) {
            const auto& a = acc[k];
            out.push_back({"mean", std::get<1>(k), std::get<2>(k), std::get<3>(k),
                           a.second > 0.0 ? a.first / a.second : kNaN, counts[k], std::get<0>(k)});
        }
        return out;
    }

    double averaged_mshe(const std::string& model, int horizon, CpClass c, const std::string& subset = "all") const {
        for (const auto& r : averaged())
            if (r.model == model && r.horizon_days == horizon && r.cp == c && r.subset == subset) return r.mshe;
        throw EvaluationError("no report entry for model '" + model + "'");
    }

    void write_csv(std::ostream& os) const {
        csv::Writer w(os);
        w.header({"window", "subset", "model", "horizon_days", "class", "mshe", "n"});
        for (const auto& r : rows) {
            w.field(r.window).field(r.subset).field(r.model).field(r.horizon_days);
            w.field(std::string(to_string(r.cp))).field(r.mshe).field(r.n);
            w.end_row();
        }
    }

    /// Table-5-shaped summary: zero and BS Delta as absolute MSHE, every
    /// other model as relative improvement over BS Delta, per horizon/class.
    void write_summary_csv(std::ostream& os) const {
        const auto avg = averaged();
        std::vector<std::string> subsets, models;
        std::vector<int> horizons;
        auto push_unique = [](auto& v, const auto& x) {
            if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
        };
        for (const auto& r : avg) {
            push_unique(subsets, r.subset);
            push_unique(horizons, r.horizon_days);
            push_unique(models, r.model);
        }
        auto lookup = [&](const std::string& sub, const std::string& m, int h, CpClass c) {
            for (const auto& r : avg)
                if (r.subset == sub && r.model == m && r.horizon_days == h && r.cp == c) return r.mshe;
            return kNaN;
        };
        csv::Writer w(os);
        w.header({"subset", "model", "horizon_days", "measure", "calls", "puts", "both"});
        for (const auto& sub : subsets) {
            for (const auto& m : models) {
                for (int h : horizons) {
                    if (!std::isfinite(lookup(sub, m, h, CpClass::both))) continue;
                    const bool absolute = m == "zero" || m == "bs_delta";
                    const bool has_base = std::isfinite(lookup(sub, "bs_delta", h, CpClass::both));
                    const bool rel = !absolute && has_base;
                    w.field(sub).field(m).field(h).field(std::string(rel ? "relative_improvement_pct" : "mshe"));
                    for (CpClass c : {CpClass::calls, CpClass::puts, CpClass::both}) {
                        const double v = lookup(sub, m, h, c);
                        const double base = lookup(sub, "bs_delta", h, c);
                        if (!rel)
                            w.field(v);
                        else
                            w.field(std::isfinite(v) && base > 0.0 ? relative_improvement(v, base) : kNaN);
                    }
                    w.end_row();
                }
            }
        }
    }
};

inline EvalReport read_eval_report(std::istream& is, bool pooled, std::string_view source = "mshe.csv") {
    auto t = csv::Table::read(is, source);
    const auto c_w = t.column("window"), c_m = t.column("model"), c_h = t.column("horizon_days"),
               c_c = t.column("class"), c_v = t.column("mshe"), c_n = t.column("n");
    const bool has_subset = t.has("subset");
    EvalReport rep;
    rep.pooled = pooled;
    for (std::size_t r = 0; r < t.size(); ++r) {
        EvalRow row;
        row.window = t.at(r, c_w);
        row.model = t.at(r, c_m);
        row.horizon_days = static_cast<int>(t.integer(r, c_h));
        const auto& c = t.at(r, c_c);
        if (c == "calls") row.cp = CpClass::calls;
        else if (c == "puts") row.cp = CpClass::puts;
        else if (c == "both") row.cp = CpClass::both;
        else throw InputError(std::string(source) + ": unknown class '" + c + "'");
        row.mshe = t.number(r, c_v);
        row.n = static_cast<long>(t.integer(r, c_n));
        if (has_subset) row.subset = t.at(r, t.column("subset"));
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

inline void write_ci_csv(std::ostream& os, const std::vector<std::pair<int, PairwiseCI>>& cis) {
    csv::Writer w(os);
    w.header({"horizon_days", "model_a", "model_b", "mean", "std", "lower", "upper", "days", "excludes_zero"});
    for (const auto& [h, c] : cis) {
        w.field(h).field(c.model_a).field(c.model_b).field(c.mean).field(c.std).field(c.lower).field(c.upper);
        w.field(c.days).field(c.excludes_zero() ? 1 : 0);
        w.end_row();
    }
}

struct LeverageEntry {
    int horizon_days = 1;
    int window_id = 0;
    LeverageRow row;
};

inline void write_leverage_csv(std::ostream& os, const std::vector<LeverageEntry>& rows) {
    csv::Writer w(os);
    w.header({"horizon_days", "window", "class", "maturity", "slope", "leverage_coefficient", "n"});
    for (const auto& e : rows) {
        w.field(e.horizon_days).field(e.window_id).field(std::string(to_string(e.row.cp)));
        w.field(std::string(to_string(e.row.bucket))).field(e.row.slope).field(e.row.lc).field(e.row.n);
        w.end_row();
    }
}

} // namespace deltabench
