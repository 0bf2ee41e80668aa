#pragma once

// Black-Scholes prices and Greeks, implied-volatility inversion, and
// semi-closed-form Heston prices from the characteristic function in its
// "little trap" form.

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "error.hpp"
#include "listings.hpp"
#include "normal.hpp"
#include "quadrature.hpp"
#include "simkit.hpp"

namespace deltabench {

struct BsQuote {
    double price = 0.0;
    double delta = 0.0;
    double vega = 0.0;   ///< per unit of volatility
    double gamma = 0.0;
    double vanna = 0.0;  ///< d(delta)/d(sigma)
    double d1 = 0.0;
    double d2 = 0.0;
};

namespace detail {

inline void check_bs_inputs(double S, double K, double tau, double sigma, double r) {
    if (!std::isfinite(S) || !std::isfinite(K) || !std::isfinite(tau) || !std::isfinite(sigma) ||
        !std::isfinite(r))
        throw ParameterError("Black-Scholes: non-finite input");
    if (!(S > 0.0) || !(K > 0.0)) throw ParameterError("Black-Scholes: S and K must be positive");
    if (!(tau > 0.0)) throw ParameterError("Black-Scholes: tau must be positive");
    if (!(sigma > 0.0)) throw ParameterError("Black-Scholes: sigma must be positive");
}

} // namespace detail

inline double bs_price(double S, double K, double tau, double sigma, double r, OptionKind kind) {
    detail::check_bs_inputs(S, K, tau, sigma, r);
    const double sd = sigma * std::sqrt(tau);
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * tau) / sd;
    const double d2 = d1 - sd;
    const double df = std::exp(-r * tau);
    if (kind == OptionKind::call) return S * norm_cdf(d1) - K * df * norm_cdf(d2);
    return K * df * norm_cdf(-d2) - S * norm_cdf(-d1);
}

inline BsQuote bs_greeks(double S, double K, double tau, double sigma, double r, OptionKind kind) {
    detail::check_bs_inputs(S, K, tau, sigma, r);
    BsQuote q;
    const double sqrt_tau = std::sqrt(tau);
    const double sd = sigma * sqrt_tau;
    q.d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * tau) / sd;
    q.d2 = q.d1 - sd;
    const double df = std::exp(-r * tau);
    const double pdf = norm_pdf(q.d1);
    if (kind == OptionKind::call) {
        q.price = S * norm_cdf(q.d1) - K * df * norm_cdf(q.d2);
        q.delta = norm_cdf(q.d1);
    } else {
        q.price = K * df * norm_cdf(-q.d2) - S * norm_cdf(-q.d1);
        q.delta = norm_cdf(q.d1) - 1.0;
    }
    q.vega = S * pdf * sqrt_tau;
    q.gamma = pdf / (S * sd);
    q.vanna = -pdf * q.d2 / sigma;
    return q;
}

/// No-arbitrage price bounds (lower, upper) of a European option.
inline std::pair<double, double> price_bounds(double S, double K, double tau, double r, OptionKind kind) {
    const double dk = K * std::exp(-r * tau);
    if (kind == OptionKind::call) return {std::max(S - dk, 0.0), S};
    return {std::max(dk - S, 0.0), dk};
}

struct ImpliedVol {
    double sigma_impl = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

/// Bracketed bisection down to a 1e-3 bracket, then safeguarded Newton.
inline ImpliedVol implied_vol(double price, double S, double K, double tau, double r, OptionKind kind,
                              double tolerance = 1e-8) {
    if (!std::isfinite(price)) throw InputError("implied_vol: non-finite price");
    detail::check_bs_inputs(S, K, tau, 0.2, r);
    const auto [lo_bound, hi_bound] = price_bounds(S, K, tau, r, kind);
    if (!(price > lo_bound) || !(price < hi_bound)) {
        std::ostringstream msg;
        msg << "implied_vol: price " << price << " outside no-arbitrage bounds (" << lo_bound << ", "
            << hi_bound << ")";
        throw InputError(msg.str());
    }
    constexpr int max_iterations = 200;
    int it = 0;
    double lo = 1e-6, hi = 1.0;
    while (bs_price(S, K, tau, hi, r, kind) < price) {
        lo = hi;
        hi *= 2.0;
        if (++it > 40) throw NumericalError("implied_vol: cannot bracket the price");
    }
    while (hi - lo > 1e-3 && it < max_iterations) {
        const double mid = 0.5 * (lo + hi);
        if (bs_price(S, K, tau, mid, r, kind) < price)
            lo = mid;
        else
            hi = mid;
        ++it;
    }
    double sigma = 0.5 * (lo + hi);
    double residual = 0.0;
    for (; it < max_iterations; ++it) {
        const BsQuote q = bs_greeks(S, K, tau, sigma, r, kind);
        residual = q.price - price;
        if (residual < 0.0)
            lo = sigma;
        else
            hi = sigma;
        if (residual == 0.0) break;
        double next = q.vega > 0.0 ? sigma - residual / q.vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - sigma);
        sigma = next;
        if (step < 1e-14 * std::max(1.0, sigma)) {
            residual = bs_price(S, K, tau, sigma, r, kind) - price;
            break;
        }
    }
    if (!(std::abs(residual) <= tolerance)) {
        std::ostringstream msg;
        msg << "implied_vol: no convergence after " << it << " iterations (residual " << residual << ")";
        throw NumericalError(msg.str());
    }
    return {sigma, it, residual};
}

// ---------------------------------------------------------------------------
// Heston

namespace detail {

using cplx = std::complex<double>;

inline cplx log1p_small(cplx z) {
    if (std::abs(z) < 1e-5) return z - 0.5 * z * z + z * z * z / 3.0;
    return std::log(1.0 + z);
}

/// log of the characteristic function of ln S_T under measure j (1 or 2),
/// excluding the i*u*ln(S) term. Written so that sigma_y -> 0 is regular.
inline cplx heston_log_cf(const HestonParams& p, double Y, double tau, double r, double u, int j) {
    const cplx i(0.0, 1.0);
    const double uj = j == 1 ? 0.5 : -0.5;
    const double bj = j == 1 ? p.kappa - p.rho * p.sigma_y : p.kappa;
    const double s2 = p.sigma_y * p.sigma_y;
    const cplx beta = bj - p.rho * p.sigma_y * u * i;
    const cplx A = 2.0 * uj * u * i - u * u;
    const cplx d = std::sqrt(beta * beta - s2 * A);
    const cplx bpd = beta + d;
    const cplx q = A / (bpd * bpd);  // g / sigma^2
    const cplx g = s2 * q;
    const cplx E = std::exp(-d * tau);
    cplx log_term;  // [ln(1 - gE) - ln(1 - g)] / sigma^2
    if (std::abs(g) < 1e-8)
        log_term = q * (1.0 - E) + 0.5 * s2 * q * q * (1.0 - E * E);
    else
        log_term = (log1p_small(-g * E) - log1p_small(-g)) / s2;
    const cplx D = A / bpd * (1.0 - E) / (1.0 - g * E);
    const cplx C = r * u * i * tau + p.kappa * p.theta * (A * tau / bpd - 2.0 * log_term);
    return C + D * Y;
}

} // namespace detail

struct HestonQuadrature {
    int nodes = 128;
    double upper = 200.0;   ///< minimum truncation point of the u-integral
    bool adaptive = true;   ///< extend the truncation point for small total variance
};

/// Characteristic-function values at the quadrature nodes for one
/// (S, Y, tau, r); strike-independent, so one slice prices a whole expiry.
class HestonSlice {
public:
    HestonSlice(const HestonParams& params, double S, double Y, double tau, double r,
                HestonQuadrature quad = {})
        : S_(S), tau_(tau), r_(r) {
        if (!(S > 0.0) || !std::isfinite(S)) throw ParameterError("Heston: S must be positive");
        if (!(Y > 0.0) || !std::isfinite(Y)) throw ParameterError("Heston: Y must be positive");
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("Heston: tau must be positive");
        if (!(std::abs(params.rho) <= 1.0)) throw ParameterError("Heston: |rho| must not exceed 1");
        if (!(params.kappa > 0.0) || !(params.theta > 0.0) || !(params.sigma_y >= 0.0))
            throw ParameterError("Heston: invalid parameters");
        double upper = quad.upper;
        if (quad.adaptive) {
            const double e = std::exp(-params.kappa * tau);
            const double total_var =
                std::max(params.theta * tau + (Y - params.theta) * (1.0 - e) / params.kappa, 1e-10);
            upper = std::max(upper, std::sqrt(2.0 * 40.0 / total_var));
        }
        const auto& rule = gauss_legendre(quad.nodes);
        const double half = 0.5 * upper;
        const double log_s = std::log(S);
        u_.resize(rule.nodes.size());
        h1_.resize(rule.nodes.size());
        h2_.resize(rule.nodes.size());
        const detail::cplx i(0.0, 1.0);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double u = half * (rule.nodes[k] + 1.0);
            const double w = half * rule.weights[k];
            const detail::cplx shift = i * u * log_s;
            u_[k] = u;
            h1_[k] = w * std::exp(detail::heston_log_cf(params, Y, tau, r, u, 1) + shift) / (i * u);
            h2_[k] = w * std::exp(detail::heston_log_cf(params, Y, tau, r, u, 2) + shift) / (i * u);
        }
    }

    /// (P1, P2) for strike K.
    std::pair<double, double> probabilities(double K) const {
        const double log_k = std::log(K);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < u_.size(); ++k) {
            const double phase = -u_[k] * log_k;
            const double c = std::cos(phase), s = std::sin(phase);
            s1 += c * h1_[k].real() - s * h1_[k].imag();
            s2 += c * h2_[k].real() - s * h2_[k].imag();
        }
        return {0.5 + s1 / std::numbers::pi, 0.5 + s2 / std::numbers::pi};
    }

    double price(double K, OptionKind kind) const { return price_and_delta(K, kind).first; }

    std::pair<double, double> price_and_delta(double K, OptionKind kind) const {
        if (!(K > 0.0) || !std::isfinite(K)) throw ParameterError("Heston: K must be positive");
        const auto [p1, p2] = probabilities(K);
        const double dk = K * std::exp(-r_ * tau_);
        double call = S_ * p1 - dk * p2;
        if (!std::isfinite(call)) {
            std::ostringstream msg;
            msg << "Heston quadrature produced a non-finite price (S=" << S_ << ", K=" << K
                << ", tau=" << tau_ << ")";
            throw NumericalError(msg.str());
        }
        const auto [lo, hi] = price_bounds(S_, K, tau_, r_, OptionKind::call);
        call = std::clamp(call, lo, hi);
        if (kind == OptionKind::call) return {call, p1};
        return {call - S_ + dk, p1 - 1.0};
    }

private:
    double S_, tau_, r_;
    std::vector<double> u_;
    std::vector<detail::cplx> h1_, h2_;
};

inline double heston_price(const HestonParams& params, double S, double Y, double K, double tau, double r,
                           OptionKind kind, HestonQuadrature quad = {}) {
    return HestonSlice(params, S, Y, tau, r, quad).price(K, kind);
}

struct HestonSensitivities {
    double delta = 0.0;  ///< dC/dS
    double nu = 0.0;     ///< dC/dY, per unit of variance
};

inline constexpr double kVarianceBumpRelative = 1e-4;

/// Delta from P1; nu by a central difference in Y with relative step 1e-4.
inline HestonSensitivities heston_delta_vega(const HestonParams& params, double S, double Y, double K,
                                             double tau, double r, OptionKind kind, HestonQuadrature quad = {},
                                             double relative_step = kVarianceBumpRelative) {
    HestonSensitivities out;
    out.delta = HestonSlice(params, S, Y, tau, r, quad).price_and_delta(K, kind).second;
    const double h = relative_step * Y;
    const double up = HestonSlice(params, S, Y + h, tau, r, quad).price(K, kind);
    const double dn = HestonSlice(params, S, Y - h, tau, r, quad).price(K, kind);
    out.nu = (up - dn) / (2.0 * h);
    return out;
}

} // namespace deltabench
