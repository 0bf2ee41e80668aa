#include <gtest/gtest.h>

#include <cmath>
#include <iostream>

#include "deltabench/datapipe.hpp"
#include "deltabench/hedgers.hpp"

using namespace deltabench;

namespace {

// Normalized sample with BS sensitivities and a target y set by the caller.
Sample synthetic(Rng& rng, int cp) {
    Sample s;
    s.cp_flag = cp;
    s.S0 = 100.0;
    s.moneyness = cp == 0 ? 0.8 + 0.2 * rng.uniform() : 1.0 + 0.5 * rng.uniform();
    s.strike = 100.0 / s.moneyness;
    s.tau = (2.0 + 250.0 * rng.uniform()) * kDayFraction;
    const double sigma = 0.1 + 0.3 * rng.uniform();
    const auto q = bs_greeks(100.0, s.strike, s.tau, sigma, 0.0, s.kind());
    s.sqrt_total_implied_variance = sigma * std::sqrt(s.tau);
    s.delta_bs = q.delta;
    s.vega_bs = q.vega;
    s.gamma_bs = q.gamma;
    s.vanna_bs = q.vanna;
    s.C0 = q.price;
    s.S1 = 100.0 * (1.0 + 0.0126 * rng.normal());
    s.delta_t = kDayFraction;
    return s;
}

void set_target(Sample& s, double y) { s.C1 = s.C0 * s.growth() + y * s.S0 / 100.0; }

SampleTable synthetic_table(RngSeed seed, int n, const std::function<double(const Sample&, Rng&)>& target) {
    Rng rng(seed);
    SampleTable t;
    for (int i = 0; i < n; ++i) {
        auto s = synthetic(rng, i % 2);
        set_target(s, target(s, rng));
        s.index = i;
        t.push_back(s);
    }
    return t;
}

SampleTable bs_table(RngSeed seed, int days) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_gbm({}, days, seed);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    opt.r_onr = 0.01;
    auto t = build_samples(path, u.contracts, BsPricing{}, cal, opt).table;
    normalize_table(t);
    return t;
}

double mshe(const HedgeModel& m, const SampleTable& t) {
    double sum = 0.0;
    for (const auto& s : t) {
        const double e = hedging_error(s, hedge_ratio(m, s).delta);
        sum += e * e;
    }
    return sum / static_cast<double>(t.size());
}

} // namespace

TEST(Regression, VariablesAndHedgingError) {
    Sample s;
    s.S0 = 100.0;
    s.S1 = 101.0;
    s.C0 = 2.0;
    s.C1 = 2.6;
    s.r_onr = 0.0253;
    s.delta_t = kDayFraction;
    const double R = 1.0 + 0.0253 / 253.0;
    EXPECT_NEAR(regression_x(s), 100.0 * (1.01 - R), 1e-12);
    EXPECT_NEAR(regression_y(s), 2.6 - R * 2.0, 1e-12);
    EXPECT_NEAR(hedging_error(s, 0.5), 0.5 * regression_x(s) - regression_y(s), 1e-15);
    s.atm_C0 = 3.0;
    s.atm_C1 = 3.5;
    EXPECT_NEAR(hedging_error(s, 0.5, 2.0), 0.5 * regression_x(s) - regression_y(s) + 2.0 * (3.5 - R * 3.0), 1e-12);
}

TEST(HedgeRatio, SimpleModels) {
    Sample call;
    call.delta_bs = 0.531;
    Sample put = call;
    put.cp_flag = 1;
    put.delta_bs = -0.4;
    EXPECT_EQ(hedge_ratio(make_model("zero"), call).delta, 0.0);
    EXPECT_EQ(hedge_ratio(make_model("bs_delta"), call).delta, 0.531);
    EXPECT_NEAR(hedge_ratio(make_model("fixed"), call).delta, 0.4779, 1e-12);
    EXPECT_NEAR(hedge_ratio(make_model("fixed"), put).delta, -0.44, 1e-12);
    EXPECT_THROW(make_model("nonsense"), ConfigError);
}

TEST(HedgeRatio, HullWhiteWithZeroCoefficientsIsBsDelta) {
    Rng rng(2);
    auto m = make_model("hull_white");
    FitResult zero;
    zero.names = {"a", "b", "c"};
    zero.coefficients = {0.0, 0.0, 0.0};
    zero.standard_errors = {0.0, 0.0, 0.0};
    m.fits = {zero, zero};
    for (int i = 0; i < 50; ++i) {
        const auto s = synthetic(rng, i % 2);
        EXPECT_EQ(hedge_ratio(m, s).delta, s.delta_bs);
    }
}

TEST(HedgeRatio, UnfittedModelIsStateError) {
    Rng rng(1);
    const auto s = synthetic(rng, 0);
    for (const char* name : {"delta_only", "hull_white", "semilinear_2"})
        EXPECT_THROW(hedge_ratio(make_model(name), s), StateError);
}

TEST(HedgeRatio, LinearInCoefficients) {
    Rng rng(3);
    auto m = make_model("delta_vega_gamma_vanna");
    auto with = [&](std::vector<double> c) {
        auto mm = m;
        FitResult f;
        f.names = {"delta", "vega", "gamma", "vanna"};
        f.coefficients = std::move(c);
        f.standard_errors.assign(4, 0.0);
        mm.fits = {f, f};
        return mm;
    };
    const std::vector<double> a = {0.9, 0.01, -0.5, 0.2}, b = {0.1, -0.03, 1.5, 0.05};
    std::vector<double> ab(4);
    for (int k = 0; k < 4; ++k) ab[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k)] + b[static_cast<std::size_t>(k)];
    const auto ma = with(a), mb = with(b), mab = with(ab);
    for (int i = 0; i < 50; ++i) {
        const auto s = synthetic(rng, i % 2);
        EXPECT_NEAR(hedge_ratio(mab, s).delta, hedge_ratio(ma, s).delta + hedge_ratio(mb, s).delta, 1e-12);
    }
}

TEST(Ols, ExactRecovery) {
    const auto t = synthetic_table(4, 400, [](const Sample& s, Rng&) { return 0.9 * s.delta_bs * regression_x(s); });
    const auto fits = fit_linear(t, {Sensitivity::delta});
    for (const auto& f : fits) {
        EXPECT_NEAR(f.coefficients[0], 0.9, 1e-12);
        EXPECT_NEAR(f.standard_errors[0], 0.0, 1e-10);
        EXPECT_EQ(f.n_samples, 200);
    }
}

TEST(Ols, CoverageOfTwoStandardErrors) {
    const double a = 0.95, b = -0.004, eps = 0.05;
    const int seeds = 2000;
    int covered_a = 0, covered_b = 0;
    for (int k = 0; k < seeds; ++k) {
        const auto t = synthetic_table(derive_seed(77, static_cast<std::uint64_t>(k)), 600, [&](const Sample& s, Rng& rng) {
            const double x = regression_x(s);
            return a * s.delta_bs * x + b * s.vega_bs * x + eps * rng.normal();
        });
        const auto f = fit_linear(t, {Sensitivity::delta, Sensitivity::vega})[0];
        covered_a += std::abs(f.coefficients[0] - a) <= 2.0 * f.standard_errors[0];
        covered_b += std::abs(f.coefficients[1] - b) <= 2.0 * f.standard_errors[1];
    }
    // Nominal two-sided 2-sigma coverage, less three Monte Carlo standard errors.
    const double nominal = std::erf(2.0 / std::sqrt(2.0));
    const double floor = nominal - 3.0 * std::sqrt(nominal * (1.0 - nominal) / seeds);
    EXPECT_GE(covered_a, floor * seeds);
    EXPECT_GE(covered_b, floor * seeds);
    std::cout << "coverage a " << covered_a / double(seeds) << ", b " << covered_b / double(seeds) << "\n";
}

TEST(Ols, RankDeficientNamesColumns) {
    auto t = synthetic_table(5, 100, [](const Sample& s, Rng& rng) { return s.delta_bs * regression_x(s) + rng.normal(); });
    for (auto& s : t) s.gamma_bs = 3.0 * s.vega_bs;
    try {
        fit_linear(t, {Sensitivity::vega, Sensitivity::gamma});
        FAIL() << "expected FitError";
    } catch (const FitError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("collinear"), std::string::npos) << msg;
        EXPECT_TRUE(msg.find("gamma") != std::string::npos || msg.find("vega") != std::string::npos) << msg;
    }
}

TEST(Ols, TooFewSamples) {
    const auto t = synthetic_table(6, 6, [](const Sample&, Rng& rng) { return rng.normal(); });
    EXPECT_THROW(fit_linear(t, {Sensitivity::delta, Sensitivity::vega}), FitError);
}

TEST(Ols, NonFiniteSensitivityIsFitError) {
    auto t = synthetic_table(6, 40, [](const Sample&, Rng& rng) { return rng.normal(); });
    t[4].vanna_bs = kNaN;
    EXPECT_THROW(fit_linear(t, {Sensitivity::vanna}), FitError);
}

TEST(Ols, ResidualsOrthogonalToRegressors) {
    const auto t = bs_table(8, 60);
    for (const auto& name : regression_roster()) {
        auto m = fit(make_model(name), t);
        for (int cp : {0, 1}) {
            const auto rows = filter_class(t, cp == 0 ? CpClass::calls : CpClass::puts);
            const auto d = m.kind == ModelKind::linear ? detail::linear_design(m, rows)
                                                       : detail::hull_white_design(m.relaxed, rows);
            const auto& f = *m.fits[static_cast<std::size_t>(cp)];
            const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(f.coefficients.data(),
                                                                           static_cast<Eigen::Index>(f.coefficients.size()));
            const Eigen::VectorXd resid = d.y - d.X * beta;
            EXPECT_NEAR(resid.squaredNorm(), f.residual_sse, 1e-9 * f.residual_sse);
            for (Eigen::Index j = 0; j < d.X.cols(); ++j)
                EXPECT_LT(std::abs(resid.dot(d.X.col(j))), 1e-8 * resid.norm() * d.X.col(j).norm()) << name;
        }
    }
}

TEST(Ols, NestingMonotonicity) {
    const auto t = bs_table(9, 60);
    const std::vector<std::vector<Sensitivity>> nested = {
        {Sensitivity::delta},
        {Sensitivity::delta, Sensitivity::vega},
        {Sensitivity::delta, Sensitivity::vega, Sensitivity::vanna},
        {Sensitivity::delta, Sensitivity::vega, Sensitivity::vanna, Sensitivity::gamma}};
    for (int cp : {0, 1}) {
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& sens : nested) {
            const double sse = fit_linear(t, sens)[static_cast<std::size_t>(cp)].residual_sse;
            EXPECT_LE(sse, prev * (1.0 + 1e-12));
            prev = sse;
        }
    }
}

TEST(Ols, InterceptAddsColumn) {
    const auto t = bs_table(9, 40);
    auto m = make_model("delta_vega");
    m.intercept = true;
    m = fit(m, t);
    EXPECT_EQ(m.fits[0]->coefficients.size(), 3u);
    EXPECT_EQ(m.fits[0]->names.back(), "intercept");
    const auto plain = fit(make_model("delta_vega"), t);
    EXPECT_LE(m.fits[0]->residual_sse, plain.fits[0]->residual_sse);
}

TEST(HullWhite, ExactRecovery) {
    const double a = -0.2, b = 0.5, c = -0.4;
    const auto t = synthetic_table(10, 400, [&](const Sample& s, Rng&) {
        const double w = s.vega_bs / (std::sqrt(s.tau) * s.S0);
        return (s.delta_bs + w * (a + b * s.delta_bs + c * s.delta_bs * s.delta_bs)) * regression_x(s);
    });
    for (const auto& f : fit_hull_white(t, false)) {
        EXPECT_NEAR(f.coefficients[0], a, 1e-9);
        EXPECT_NEAR(f.coefficients[1], b, 1e-9);
        EXPECT_NEAR(f.coefficients[2], c, 1e-9);
    }
}

TEST(HullWhite, RelaxedNestsRestricted) {
    const auto t = synthetic_table(11, 2000, [&](const Sample& s, Rng& rng) {
        const double w = s.vega_bs / (std::sqrt(s.tau) * s.S0);
        return (s.delta_bs + w * (-0.2 + 0.5 * s.delta_bs - 0.4 * s.delta_bs * s.delta_bs)) * regression_x(s) +
               0.05 * rng.normal();
    });
    const auto restricted = fit_hull_white(t, false);
    const auto relaxed = fit_hull_white(t, true);
    for (int cp : {0, 1}) {
        const auto& r = relaxed[static_cast<std::size_t>(cp)];
        EXPECT_EQ(r.names[0], "delta");
        EXPECT_LE(std::abs(r.coefficients[0] - 1.0), 2.0 * r.standard_errors[0]);
        EXPECT_GE(restricted[static_cast<std::size_t>(cp)].residual_sse, r.residual_sse);
    }
}

TEST(Semilinear, KindOneExactRecovery) {
    const auto t = synthetic_table(12, 400, [](const Sample& s, Rng&) {
        return (0.3 * s.moneyness - 0.7 * s.sqrt_total_implied_variance + 0.1) * regression_x(s);
    });
    for (const auto& f : fit_semilinear(t, 1)) {
        EXPECT_NEAR(f.coefficients[0], 0.3, 1e-9);
        EXPECT_NEAR(f.coefficients[1], -0.7, 1e-9);
        EXPECT_NEAR(f.coefficients[2], 0.1, 1e-9);
    }
}

TEST(Semilinear, KindTwoDegenerateIsHalf) {
    auto m = make_model("semilinear_2");
    FitResult f;
    f.names = {"a", "b", "c"};
    f.coefficients = {0.0, 0.0, 0.0};
    f.standard_errors = {0.0, 0.0, 0.0};
    m.fits = {f, f};
    Rng rng(1);
    EXPECT_DOUBLE_EQ(hedge_ratio(m, synthetic(rng, 0)).delta, 0.5);
    EXPECT_DOUBLE_EQ(hedge_ratio(m, synthetic(rng, 1)).delta, -0.5);
}

TEST(Semilinear, KindTwoRecoversProbitCoefficients) {
    const double a = 2.0, b = -1.5, c = -1.8;
    const auto t = synthetic_table(13, 4000, [&](const Sample& s, Rng& rng) {
        const double d = norm_cdf(a * s.moneyness + b * s.sqrt_total_implied_variance + c) - s.cp_flag;
        return d * regression_x(s) + 0.01 * rng.normal();
    });
    for (const auto& f : fit_semilinear(t, 2)) {
        EXPECT_NEAR(f.coefficients[0], a, 4.0 * f.standard_errors[0] + 1e-6);
        EXPECT_NEAR(f.coefficients[1], b, 4.0 * f.standard_errors[1] + 1e-6);
        EXPECT_NEAR(f.coefficients[2], c, 4.0 * f.standard_errors[2] + 1e-6);
        EXPECT_GT(f.iterations, 0);
    }
}

TEST(Semilinear, WorseThanBsDeltaOnBlackScholesData) {
    const auto t = bs_table(14, 240);
    SampleTable train, test;
    for (const auto& s : t) (s.day < 180 ? train : test).push_back(s);
    const double bs = mshe(make_model("bs_delta"), test);
    EXPECT_GT(mshe(fit(make_model("semilinear_1"), train), test), bs);
    EXPECT_GT(mshe(fit(make_model("semilinear_2"), train), test), bs);
}

TEST(Heston, AdjustedDeltaLimits) {
    Sample s;
    s.S0 = 100.0;
    s.strike = 105.0;
    s.tau = 0.25;
    s.Y0 = 0.04;
    HestonParams p;
    const auto hs = heston_delta_vega(p, 100.0, 0.04, 105.0, 0.25, 0.0, OptionKind::call);
    EXPECT_LT(heston_adjusted_delta(s, p), hs.delta);  // OTM call, rho < 0
    EXPECT_GT(hs.nu, 0.0);

    HestonParams uncorrelated = p;
    uncorrelated.rho = 0.0;
    EXPECT_DOUBLE_EQ(heston_adjusted_delta(s, uncorrelated),
                     heston_delta_vega(uncorrelated, 100.0, 0.04, 105.0, 0.25, 0.0, OptionKind::call).delta);

    HestonParams flat = p;
    flat.sigma_y = 0.0;
    flat.theta = 0.04;
    EXPECT_NEAR(heston_adjusted_delta(s, flat), bs_greeks(100.0, 105.0, 0.25, 0.2, 0.0, OptionKind::call).delta, 1e-6);

    s.Y0 = kNaN;
    EXPECT_THROW(heston_adjusted_delta(s, p), InputError);
}

TEST(Heston, DeltaVegaNeutralCancelsVega) {
    const HestonParams p;
    auto m = make_model("delta_vega_neutral");
    m.heston = p;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        Sample s = synthetic(rng, i % 2);
        s.Y0 = 0.01 + 0.07 * rng.uniform();
        s.atm_strike = 100.0;
        const auto h = hedge_ratio(m, s);
        const auto g = heston_delta_vega(p, 100.0, s.Y0, s.strike, s.tau, 0.0, s.kind());
        const auto ga = heston_delta_vega(p, 100.0, s.Y0, 100.0, 1.0 / 12.0, 0.0, OptionKind::call);
        EXPECT_LT(std::abs(h.eta * ga.nu - g.nu), 1e-10 * std::max(1.0, std::abs(g.nu)));
        EXPECT_NEAR(h.delta, g.delta - h.eta * ga.delta, 1e-12);
    }
    Sample missing = synthetic(rng, 0);
    missing.Y0 = 0.04;
    EXPECT_THROW(hedge_ratio(m, missing), InputError);
    EXPECT_THROW(hedge_ratio(make_model("delta_vega_neutral"), missing), StateError);
}

TEST(Heston, DeltaOnlyCoefficientsOnHestonData) {
    const TradingCalendar cal(make_date(2018, 1, 2));
    const auto path = simulate_heston({}, 120, 10, Scheme::milstein, 1);
    const auto u = generate_option_universe(path, cal);
    const CleaningRules rules;
    BuildOptions opt;
    opt.prefilter = &rules;
    auto t = build_samples(path, u.contracts, HestonPricing{}, cal, opt).table;
    normalize_table(t);
    const auto f = fit_linear(t, {Sensitivity::delta});
    EXPECT_LT(f[0].coefficients[0], 1.0);
    EXPECT_GT(f[1].coefficients[0], 1.0);
}

TEST(ModelJson, RoundTripPreservesRatios) {
    const auto t = bs_table(15, 40);
    Rng rng(1);
    for (const auto& name : {"delta_vega_vanna", "relaxed_hull_white", "semilinear_2", "vanna_only", "fixed"}) {
        auto m = fit(make_model(name), t);
        m.window_id = 3;
        const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
        EXPECT_EQ(back.name, m.name);
        EXPECT_EQ(back.window_id, 3);
        for (int i = 0; i < 10; ++i) {
            const auto s = synthetic(rng, i % 2);
            EXPECT_EQ(hedge_ratio(back, s).delta, hedge_ratio(m, s).delta) << name;
        }
    }
    EXPECT_THROW(model_from_json(nlohmann::json::parse("{\"name\": 1}")), InputError);
}
