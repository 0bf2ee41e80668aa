#pragma once

// Underlying price paths on a trading-day grid: exact GBM transitions and
// Euler / Milstein discretisations of the Heston model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace deltabench {

inline constexpr double kTradingDaysPerYear = 253.0;
inline constexpr double kDayFraction = 1.0 / kTradingDaysPerYear;

struct GbmParams {
    double s0 = 2000.0;
    double mu = 0.1;
    double sigma = 0.2;

    void validate() const {
        if (!(s0 > 0.0) || !std::isfinite(s0)) throw ParameterError("GBM: s0 must be positive");
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw ParameterError("GBM: sigma must be non-negative");
        if (!std::isfinite(mu)) throw ParameterError("GBM: mu must be finite");
    }
};

struct HestonParams {
    double s0 = 2000.0;
    double y0 = 0.04;
    double theta = 0.04;
    double kappa = 5.0;
    double sigma_y = 0.3;
    double rho = -0.6;

    void validate() const {
        if (!(s0 > 0.0)) throw ParameterError("Heston: s0 must be positive");
        if (!(y0 > 0.0)) throw ParameterError("Heston: y0 must be positive");
        if (!(theta > 0.0)) throw ParameterError("Heston: theta must be positive");
        if (!(kappa > 0.0)) throw ParameterError("Heston: kappa must be positive");
        if (!(sigma_y >= 0.0)) throw ParameterError("Heston: sigma_y must be non-negative");
        if (!(std::abs(rho) <= 1.0)) throw ParameterError("Heston: |rho| must not exceed 1");
    }
};

enum class Scheme { euler, milstein };

struct PricePath {
    std::vector<std::int64_t> dates;  ///< trading-day indices, strictly increasing
    std::vector<double> spot;
    std::optional<std::vector<double>> variance;  ///< Heston only
    RngSeed seed = 0;
    int steps_per_day = 1;

    std::size_t size() const { return spot.size(); }
    std::int64_t first_day() const { return dates.front(); }
    std::int64_t last_day() const { return dates.back(); }
    double spot_on(std::int64_t day) const { return spot[static_cast<std::size_t>(day - dates.front())]; }
    double variance_on(std::int64_t day) const {
        return (*variance)[static_cast<std::size_t>(day - dates.front())];
    }
};

/// Exact lognormal transitions. The returned path holds n_days + 1 points,
/// day `first_day` being the initial state.
inline PricePath simulate_gbm(const GbmParams& params, int n_days, RngSeed seed,
                              std::int64_t first_day = 0) {
    params.validate();
    if (n_days < 1) throw ParameterError("simulate_gbm: n_days must be at least 1");
    PricePath path;
    path.seed = seed;
    path.steps_per_day = 1;
    path.dates.resize(static_cast<std::size_t>(n_days) + 1);
    path.spot.resize(static_cast<std::size_t>(n_days) + 1);
    Rng rng(seed);
    const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * kDayFraction;
    const double vol = params.sigma * std::sqrt(kDayFraction);
    double s = params.s0;
    for (int d = 0; d <= n_days; ++d) {
        if (d > 0) s *= std::exp(drift + vol * rng.normal());
        path.dates[static_cast<std::size_t>(d)] = first_day + d;
        path.spot[static_cast<std::size_t>(d)] = s;
    }
    return path;
}

/// Heston under a correlated Brownian pair. The spot is advanced in log space;
/// Euler uses full truncation, Milstein absorbs the variance at zero. The stored
/// daily variance is the non-negative value fed into the next step.
inline PricePath simulate_heston(const HestonParams& params, int n_days, int steps_per_day,
                                 Scheme scheme, RngSeed seed, std::int64_t first_day = 0) {
    params.validate();
    if (n_days < 1) throw ParameterError("simulate_heston: n_days must be at least 1");
    if (steps_per_day < 1) throw ParameterError("simulate_heston: steps_per_day must be at least 1");
    PricePath path;
    path.seed = seed;
    path.steps_per_day = steps_per_day;
    const auto n = static_cast<std::size_t>(n_days) + 1;
    path.dates.resize(n);
    path.spot.resize(n);
    path.variance.emplace(n);

    Rng rng(seed);
    const double dt = kDayFraction / steps_per_day;
    const double sqrt_dt = std::sqrt(dt);
    const double rho_bar = std::sqrt(std::max(0.0, 1.0 - params.rho * params.rho));
    double log_s = std::log(params.s0);
    double y = params.y0;

    for (std::size_t d = 0; d < n; ++d) {
        if (d > 0) {
            for (int k = 0; k < steps_per_day; ++k) {
                const double dw = sqrt_dt * rng.normal();
                const double dw_y = params.rho * dw + rho_bar * sqrt_dt * rng.normal();
                const double y_pos = std::max(y, 0.0);
                const double sqrt_y = std::sqrt(y_pos);
                log_s += -0.5 * y_pos * dt + sqrt_y * dw;
                if (scheme == Scheme::euler) {
                    y += params.kappa * (params.theta - y_pos) * dt + params.sigma_y * sqrt_y * dw_y;
                } else {
                    y += params.kappa * (params.theta - y_pos) * dt + params.sigma_y * sqrt_y * dw_y +
                         0.25 * params.sigma_y * params.sigma_y * (dw_y * dw_y - dt);
                    y = std::max(y, 0.0);
                }
            }
        }
        path.dates[d] = first_day + static_cast<std::int64_t>(d);
        path.spot[d] = std::exp(log_s);
        (*path.variance)[d] = std::max(y, 0.0);
    }
    return path;
}

inline void write_path_csv(std::ostream& os, const PricePath& path) {
    csv::Writer w(os);
    w.header({"day_index", "spot", "variance"});
    for (std::size_t i = 0; i < path.size(); ++i) {
        w.field(path.dates[i]).field(path.spot[i]);
        if (path.variance)
            w.field((*path.variance)[i]);
        else
            w.field(std::string{});
        w.end_row();
    }
}

inline PricePath read_path_csv(std::istream& is, std::string_view source = "path.csv") {
    auto t = csv::Table::read(is, source);
    const auto c_day = t.column("day_index");
    const auto c_spot = t.column("spot");
    const auto c_var = t.column("variance");
    PricePath path;
    bool any_variance = false;
    std::vector<double> var;
    for (std::size_t r = 0; r < t.size(); ++r) {
        path.dates.push_back(t.integer(r, c_day));
        path.spot.push_back(t.number(r, c_spot));
        if (!t.at(r, c_var).empty()) any_variance = true;
        var.push_back(t.number(r, c_var));
        if (!(path.spot.back() > 0.0)) throw InputError(std::string(source) + ": non-positive spot");
        if (r > 0 && path.dates[r] <= path.dates[r - 1])
            throw InputError(std::string(source) + ": day_index not strictly increasing");
    }
    if (path.spot.empty()) throw InputError(std::string(source) + ": empty path");
    if (any_variance) path.variance = std::move(var);
    return path;
}

} // namespace deltabench
