#include <gtest/gtest.h>

#include <cmath>

#include "deltabench/pricer.hpp"

using namespace deltabench;

namespace {

constexpr auto kCall = OptionKind::call;
constexpr auto kPut = OptionKind::put;

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Inputs {
    double S, K, tau, sigma, r;
};

Inputs random_inputs(Rng& rng) {
    Inputs in;
    in.S = 100.0;
    in.K = in.S / (0.8 + 0.7 * rng.uniform());
    in.tau = 1.0 / 253.0 + rng.uniform();
    in.sigma = 0.1 + 0.4 * rng.uniform();
    in.r = 0.03 * rng.uniform();
    return in;
}

bool close_rel(double a, double b, double rel, double floor) {
    return std::abs(a - b) <= rel * std::max(std::abs(b), floor);
}

HestonParams flat_heston() {
    HestonParams p;
    p.sigma_y = 0.0;
    p.y0 = p.theta = 0.04;
    return p;
}

} // namespace

TEST(BlackScholes, AtTheMoneyKnownValue) {
    // sigma * sqrt(tau) = 0.2 with tau = 1
    const double c = bs_price(100.0, 100.0, 1.0, 0.2, 0.0, kCall);
    EXPECT_NEAR(c, 100.0 * (std_normal_cdf(0.1) - std_normal_cdf(-0.1)), 1e-10);
    EXPECT_NEAR(c, 7.9656, 5e-5);
}

TEST(BlackScholes, DeltaKnownValue) {
    const auto q = bs_greeks(100.0, 100.0, 0.25, 0.4, 0.0, kCall);
    EXPECT_NEAR(q.d1, 0.1, 1e-14);
    EXPECT_NEAR(q.delta, std_normal_cdf(0.1), 1e-14);
    EXPECT_NEAR(q.delta, 0.539828, 1e-6);
    EXPECT_NEAR(bs_greeks(100.0, 100.0, 0.25, 0.4, 0.0, kPut).delta, q.delta - 1.0, 1e-15);
}

TEST(BlackScholes, IntrinsicLimit) {
    EXPECT_NEAR(bs_price(110.0, 100.0, 0.5, 1e-9, 0.0, kCall), 10.0, 1e-9);
    EXPECT_NEAR(bs_price(90.0, 100.0, 0.5, 1e-9, 0.0, kCall), 0.0, 1e-9);
}

TEST(BlackScholes, PutCallParity) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto in = random_inputs(rng);
        const double c = bs_price(in.S, in.K, in.tau, in.sigma, in.r, kCall);
        const double p = bs_price(in.S, in.K, in.tau, in.sigma, in.r, kPut);
        EXPECT_NEAR(c - p, in.S - in.K * std::exp(-in.r * in.tau), 1e-10);
    }
}

TEST(BlackScholes, VannaSigns) {
    // d2 = 0 when ln(S/K) = sigma^2 tau / 2 with r = 0
    const double sigma = 0.2, tau = 0.5;
    const double K = 100.0 / std::exp(0.5 * sigma * sigma * tau);
    EXPECT_NEAR(bs_greeks(100.0, K, tau, sigma, 0.0, kCall).vanna, 0.0, 1e-12);
    EXPECT_GT(bs_greeks(100.0, 110.0, tau, sigma, 0.0, kCall).vanna, 0.0);  // OTM call
    EXPECT_LT(bs_greeks(100.0, 90.0, tau, sigma, 0.0, kPut).vanna, 0.0);    // OTM put
}

TEST(BlackScholes, GreeksMatchFiniteDifferences) {
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const auto in = random_inputs(rng);
        for (auto kind : {kCall, kPut}) {
            const auto q = bs_greeks(in.S, in.K, in.tau, in.sigma, in.r, kind);
            const double hs = 1e-5 * in.S, hv = 1e-5 * in.sigma;
            auto price = [&](double S, double sig) { return bs_price(S, in.K, in.tau, sig, in.r, kind); };
            auto delta = [&](double S, double sig) { return bs_greeks(S, in.K, in.tau, sig, in.r, kind).delta; };
            const double fd_delta = (price(in.S + hs, in.sigma) - price(in.S - hs, in.sigma)) / (2 * hs);
            const double fd_vega = (price(in.S, in.sigma + hv) - price(in.S, in.sigma - hv)) / (2 * hv);
            const double fd_gamma = (delta(in.S + hs, in.sigma) - delta(in.S - hs, in.sigma)) / (2 * hs);
            const double fd_vanna = (delta(in.S, in.sigma + hv) - delta(in.S, in.sigma - hv)) / (2 * hv);
            EXPECT_TRUE(close_rel(fd_delta, q.delta, 1e-5, 1e-3)) << fd_delta << " vs " << q.delta;
            EXPECT_TRUE(close_rel(fd_vega, q.vega, 1e-5, 1e-3)) << fd_vega << " vs " << q.vega;
            EXPECT_TRUE(close_rel(fd_gamma, q.gamma, 1e-5, 1e-5)) << fd_gamma << " vs " << q.gamma;
            EXPECT_TRUE(close_rel(fd_vanna, q.vanna, 1e-5, 1e-3)) << fd_vanna << " vs " << q.vanna;
        }
    }
}

TEST(BlackScholes, CallPutVannaEqual) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto in = random_inputs(rng);
        const auto c = bs_greeks(in.S, in.K, in.tau, in.sigma, in.r, kCall);
        const auto p = bs_greeks(in.S, in.K, in.tau, in.sigma, in.r, kPut);
        EXPECT_DOUBLE_EQ(c.vanna, p.vanna);
        EXPECT_DOUBLE_EQ(c.vega, p.vega);
        EXPECT_DOUBLE_EQ(c.gamma, p.gamma);
    }
}

TEST(BlackScholes, PriceIncreasingInVol) {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const auto in = random_inputs(rng);
        for (auto kind : {kCall, kPut}) {
            const double lo = bs_price(in.S, in.K, in.tau, in.sigma, in.r, kind);
            const double hi = bs_price(in.S, in.K, in.tau, in.sigma * 1.01, in.r, kind);
            EXPECT_LE(lo, hi);
            if (bs_greeks(in.S, in.K, in.tau, in.sigma, in.r, kind).vega > 1e-6) {
                EXPECT_LT(lo, hi);
            }
        }
    }
}

TEST(BlackScholes, RejectsBadInputs) {
    EXPECT_THROW(bs_greeks(100, 100, 0.0, 0.2, 0, kCall), ParameterError);
    EXPECT_THROW(bs_price(100, 100, 0.5, 0.2, std::nan(""), kCall), ParameterError);
    EXPECT_THROW(bs_price(-1, 100, 0.5, 0.2, 0, kCall), ParameterError);
}

TEST(ImpliedVol, RoundTrip) {
    Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        const auto in = random_inputs(rng);
        for (auto kind : {kCall, kPut}) {
            const double p = bs_price(in.S, in.K, in.tau, in.sigma, in.r, kind);
            const auto [lo, hi] = price_bounds(in.S, in.K, in.tau, in.r, kind);
            if (p - lo < 1e-9) continue;  // numerically at the bound
            const auto iv = implied_vol(p, in.S, in.K, in.tau, in.r, kind);
            EXPECT_LE(std::abs(bs_price(in.S, in.K, in.tau, iv.sigma_impl, in.r, kind) - p), 1e-8);
            if (p - lo > 1e-4) {
                EXPECT_NEAR(iv.sigma_impl, in.sigma, 1e-6);
            }
        }
    }
}

TEST(ImpliedVol, ExactRoundTripAtTwentyPercent) {
    const double p = bs_price(100.0, 100.0, 0.25, 0.2, 0.01, kCall);
    EXPECT_NEAR(implied_vol(p, 100.0, 100.0, 0.25, 0.01, kCall).sigma_impl, 0.2, 1e-8);
}

TEST(ImpliedVol, IncreasingInPrice) {
    double prev = 0.0;
    for (double p = 1.0; p < 20.0; p += 0.5) {
        const double s = implied_vol(p, 100.0, 100.0, 0.5, 0.0, kCall).sigma_impl;
        EXPECT_GT(s, prev);
        prev = s;
    }
}

TEST(ImpliedVol, OutOfBoundsIsAnInversionError) {
    EXPECT_THROW(implied_vol(9.0, 110.0, 100.0, 0.5, 0.0, kCall), InputError);   // below intrinsic
    EXPECT_THROW(implied_vol(120.0, 110.0, 100.0, 0.5, 0.0, kCall), InputError);  // above spot
    EXPECT_THROW(implied_vol(std::nan(""), 110.0, 100.0, 0.5, 0.0, kCall), InputError);
}

TEST(Heston, DegenerateMatchesBlackScholes) {
    const auto p = flat_heston();
    for (double tau : {1.0 / 253.0, 0.1, 0.5, 1.0})
        for (double m : {0.8, 0.95, 1.0, 1.1, 1.5})
            for (auto kind : {kCall, kPut}) {
                const double K = 2000.0 / m;
                EXPECT_NEAR(heston_price(p, 2000.0, 0.04, K, tau, 0.01, kind), bs_price(2000.0, K, tau, 0.2, 0.01, kind),
                            1e-6)
                    << tau << " " << m;
                const auto hs = heston_delta_vega(p, 2000.0, 0.04, K, tau, 0.01, kind);
                EXPECT_NEAR(hs.delta, bs_greeks(2000.0, K, tau, 0.2, 0.01, kind).delta, 1e-6);
            }
}

TEST(Heston, DegenerateNuMatchesVarianceDerivative) {
    // With sigma_y = 0 and kappa small the variance is frozen, so dC/dY = vega / (2 sqrt(Y)).
    HestonParams p = flat_heston();
    p.kappa = 1e-8;
    const double K = 2100.0, tau = 0.5;
    const auto hs = heston_delta_vega(p, 2000.0, 0.04, K, tau, 0.0, kCall);
    const auto q = bs_greeks(2000.0, K, tau, 0.2, 0.0, kCall);
    EXPECT_NEAR(hs.nu, q.vega / (2.0 * 0.2), 1e-4 * q.vega);
}

TEST(Heston, QuadratureDoublingStable) {
    const HestonParams p;
    HestonQuadrature q256;
    q256.nodes = 256;
    for (double tau : {1.0 / 253.0, 2.0 / 253.0, 0.05, 0.25, 1.0})
        for (double m : {0.8, 0.9, 1.0, 1.1, 1.25, 1.5})
            for (double Y : {0.01, 0.04, 0.09}) {
                const double K = 100.0 / m;
                const double a = heston_price(p, 100.0, Y, K, tau, 0.0, kCall);
                const double b = heston_price(p, 100.0, Y, K, tau, 0.0, kCall, q256);
                EXPECT_NEAR(a, b, 1e-8) << tau << " " << m << " " << Y;
            }
}

TEST(Heston, ArbitrageBoundsAndParity) {
    const HestonParams p;
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto in = random_inputs(rng);
        const double Y = 0.01 + 0.08 * rng.uniform();
        const double c = heston_price(p, in.S, Y, in.K, in.tau, in.r, kCall);
        const double put = heston_price(p, in.S, Y, in.K, in.tau, in.r, kPut);
        EXPECT_GE(c, std::max(in.S - in.K * std::exp(-in.r * in.tau), 0.0));
        EXPECT_LE(c, in.S);
        EXPECT_NEAR(c - put, in.S - in.K * std::exp(-in.r * in.tau), 1e-9);
    }
}

TEST(Heston, DeepInTheMoneyDeltaNearOne) {
    const auto hs = heston_delta_vega(HestonParams{}, 2000.0, 0.04, 1000.0, 0.25, 0.0, kCall);
    EXPECT_NEAR(hs.delta, 1.0, 1e-6);
}

TEST(Heston, NuRichardsonCrossCheck) {
    const HestonParams p;
    for (double m : {0.9, 1.0, 1.1})
        for (double tau : {0.05, 0.5}) {
            const double K = 2000.0 / m;
            const double d1 = heston_delta_vega(p, 2000.0, 0.04, K, tau, 0.0, kCall).nu;
            const double d2 = heston_delta_vega(p, 2000.0, 0.04, K, tau, 0.0, kCall, {}, 0.5e-4).nu;
            const double richardson = (4.0 * d2 - d1) / 3.0;
            EXPECT_NEAR(d1, richardson, 1e-4 * std::abs(richardson)) << m << " " << tau;
        }
}

TEST(Heston, MonteCarloOracle) {
    // Independent Milstein MC at r = 0 on the pricing measure.
    const HestonParams p;
    const double S = 2000.0, K = 2000.0, tau = 0.25;
    const int days = static_cast<int>(std::lround(tau * 253.0));
    const int n = 100000, steps = 4;
    const double tau_eff = days / 253.0;
    const double dt = tau_eff / (days * steps);
    const double rho_bar = std::sqrt(1.0 - p.rho * p.rho);
    Rng rng(2024);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = std::log(S), y = p.y0;
        for (int k = 0; k < days * steps; ++k) {
            const double z1 = rng.normal(), z2 = p.rho * z1 + rho_bar * rng.normal();
            const double sy = std::sqrt(y);
            x += -0.5 * y * dt + sy * std::sqrt(dt) * z1;
            y += p.kappa * (p.theta - y) * dt + p.sigma_y * sy * std::sqrt(dt) * z2 +
                 0.25 * p.sigma_y * p.sigma_y * dt * (z2 * z2 - 1.0);
            y = std::max(y, 0.0);
        }
        const double payoff = std::max(std::exp(x) - K, 0.0);
        sum += payoff;
        sum2 += payoff * payoff;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const double exact = heston_price(p, S, p.y0, K, tau_eff, 0.0, kCall);
    EXPECT_NEAR(exact, mean, 3.0 * se) << "se " << se;
}

TEST(Heston, AtTheMoneyImpliedVolNearTwentyPercent) {
    const HestonParams p;
    const double c = heston_price(p, 2000.0, 0.04, 2000.0, 0.25, 0.0, kCall);
    const double iv = implied_vol(c, 2000.0, 2000.0, 0.25, 0.0, kCall).sigma_impl;
    EXPECT_GE(iv, 0.15);
    EXPECT_LE(iv, 0.25);
}

TEST(Heston, RejectsBadInputs) {
    EXPECT_THROW(heston_price(HestonParams{}, 2000.0, 0.0, 2000.0, 0.25, 0.0, kCall), ParameterError);
    EXPECT_THROW(heston_price(HestonParams{}, 2000.0, 0.04, 2000.0, 0.0, 0.0, kCall), ParameterError);
}
