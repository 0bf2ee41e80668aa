#pragma once

// Non-neural hedging models and their fitting procedures.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "normal.hpp"
#include "ols.hpp"
#include "pricer.hpp"
#include "sample.hpp"
#include "simkit.hpp"

namespace deltabench {

enum class ModelKind { zero, bs_delta, fixed, linear, hull_white, semilinear, heston_adjusted, delta_vega_neutral };

enum class Sensitivity { delta, vega, gamma, vanna };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::zero: return "zero";
        case ModelKind::bs_delta: return "bs_delta";
        case ModelKind::fixed: return "fixed";
        case ModelKind::linear: return "linear";
        case ModelKind::hull_white: return "hull_white";
        case ModelKind::semilinear: return "semilinear";
        case ModelKind::heston_adjusted: return "heston_adjusted";
        case ModelKind::delta_vega_neutral: return "delta_vega_neutral";
    }
    return "?";
}

inline const char* to_string(Sensitivity s) {
    switch (s) {
        case Sensitivity::delta: return "delta";
        case Sensitivity::vega: return "vega";
        case Sensitivity::gamma: return "gamma";
        case Sensitivity::vanna: return "vanna";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    for (auto k : {ModelKind::zero, ModelKind::bs_delta, ModelKind::fixed, ModelKind::linear, ModelKind::hull_white,
                   ModelKind::semilinear, ModelKind::heston_adjusted, ModelKind::delta_vega_neutral})
        if (s == to_string(k)) return k;
    throw InputError("unknown model kind '" + s + "'");
}

inline Sensitivity parse_sensitivity(const std::string& s) {
    for (auto k : {Sensitivity::delta, Sensitivity::vega, Sensitivity::gamma, Sensitivity::vanna})
        if (s == to_string(k)) return k;
    throw InputError("unknown sensitivity '" + s + "'");
}

inline double sensitivity_value(const Sample& s, Sensitivity k) {
    switch (k) {
        case Sensitivity::delta: return s.delta_bs;
        case Sensitivity::vega: return s.vega_bs;
        case Sensitivity::gamma: return s.gamma_bs;
        case Sensitivity::vanna: return s.vanna_bs;
    }
    return kNaN;
}

struct HedgeModel {
    ModelKind kind = ModelKind::zero;
    std::string name;

    double f_call = 0.9;
    double f_put = 1.1;

    // linear: delta_bs enters as an offset with coefficient one when delta
    // is not among the sensitivities and `delta_offset` is set
    std::vector<Sensitivity> sensitivities;
    bool delta_offset = false;
    bool intercept = false;

    bool relaxed = false;     // hull_white
    int semilinear_kind = 1;  // semilinear

    std::optional<HestonParams> heston;
    HestonQuadrature quadrature{};
    double atm_tenor = 1.0 / 12.0;

    std::array<std::optional<FitResult>, 2> fits;  ///< indexed by cp_flag
    int window_id = 0;

    bool needs_fit() const {
        return kind == ModelKind::linear || kind == ModelKind::hull_white || kind == ModelKind::semilinear;
    }
    bool uses_second_instrument() const { return kind == ModelKind::delta_vega_neutral; }
};

/// Named models of the benchmark roster.
inline HedgeModel make_model(const std::string& name) {
    HedgeModel m;
    m.name = name;
    using S = Sensitivity;
    auto linear = [&](std::vector<Sensitivity> sens, bool offset) {
        m.kind = ModelKind::linear;
        m.sensitivities = std::move(sens);
        m.delta_offset = offset;
    };
    if (name == "zero") m.kind = ModelKind::zero;
    else if (name == "bs_delta") m.kind = ModelKind::bs_delta;
    else if (name == "fixed") m.kind = ModelKind::fixed;
    else if (name == "delta_only") linear({S::delta}, false);
    else if (name == "gamma_only") linear({S::gamma}, true);
    else if (name == "vega_only") linear({S::vega}, true);
    else if (name == "vanna_only") linear({S::vanna}, true);
    else if (name == "delta_gamma") linear({S::delta, S::gamma}, false);
    else if (name == "delta_vega") linear({S::delta, S::vega}, false);
    else if (name == "delta_vanna") linear({S::delta, S::vanna}, false);
    else if (name == "delta_vega_gamma") linear({S::delta, S::vega, S::gamma}, false);
    else if (name == "delta_vega_vanna") linear({S::delta, S::vega, S::vanna}, false);
    else if (name == "delta_gamma_vanna") linear({S::delta, S::gamma, S::vanna}, false);
    else if (name == "delta_vega_gamma_vanna") linear({S::delta, S::vega, S::gamma, S::vanna}, false);
    else if (name == "hull_white") m.kind = ModelKind::hull_white;
    else if (name == "relaxed_hull_white") {
        m.kind = ModelKind::hull_white;
        m.relaxed = true;
    } else if (name == "semilinear_1") m.kind = ModelKind::semilinear;
    else if (name == "semilinear_2") {
        m.kind = ModelKind::semilinear;
        m.semilinear_kind = 2;
    } else if (name == "heston_adjusted") m.kind = ModelKind::heston_adjusted;
    else if (name == "delta_vega_neutral") m.kind = ModelKind::delta_vega_neutral;
    else throw ConfigError("unknown hedging model '" + name + "'");
    return m;
}

inline const std::vector<std::string>& regression_roster() {
    static const std::vector<std::string> names = {
        "delta_only",       "gamma_only",       "vega_only",         "vanna_only",
        "delta_gamma",      "delta_vega",       "delta_vanna",       "delta_vega_gamma",
        "delta_vega_vanna", "delta_gamma_vanna", "delta_vega_gamma_vanna", "hull_white",
        "relaxed_hull_white"};
    return names;
}

// ---------------------------------------------------------------------------
// Regression variables

/// x = 100 (S1/S0 - R)
inline double regression_x(const Sample& s) { return 100.0 * (s.S1 / s.S0 - s.growth()); }

/// y = 100/S0 (C1 - R C0)
inline double regression_y(const Sample& s) { return 100.0 / s.S0 * (s.C1 - s.growth() * s.C0); }

/// Hedging error 100 V / S0 of the (optionally two-instrument) hedge.
inline double hedging_error(const Sample& s, double delta, double eta = 0.0) {
    double v = delta * regression_x(s) - regression_y(s);
    if (eta != 0.0) v += eta * 100.0 / s.S0 * (s.atm_C1 - s.growth() * s.atm_C0);
    return v;
}

namespace detail {

struct Design {
    std::vector<std::string> names;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;  ///< target net of any fixed offset
};

inline double hw_scale(const Sample& s) { return s.vega_bs / (std::sqrt(s.tau) * s.S0); }

inline void require_finite(double v, const char* what, const Sample& s) {
    if (!std::isfinite(v))
        throw FitError(std::string("missing ") + what + " on sample " + std::to_string(s.index) +
                       (s.contract.empty() ? "" : " (" + s.contract + ")"));
}

inline Design linear_design(const HedgeModel& m, const SampleTable& rows) {
    Design d;
    for (auto k : m.sensitivities) d.names.push_back(to_string(k));
    if (m.intercept) d.names.push_back("intercept");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(d.names.size());
    d.X.resize(n, p);
    d.y.resize(n);
    const bool offset = m.delta_offset && std::find(m.sensitivities.begin(), m.sensitivities.end(),
                                                    Sensitivity::delta) == m.sensitivities.end();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = rows[static_cast<std::size_t>(i)];
        const double x = regression_x(s);
        Eigen::Index j = 0;
        for (auto k : m.sensitivities) {
            const double v = sensitivity_value(s, k);
            require_finite(v, to_string(k), s);
            d.X(i, j++) = v * x;
        }
        if (m.intercept) d.X(i, j++) = x;
        d.y[i] = regression_y(s) - (offset ? s.delta_bs * x : 0.0);
    }
    return d;
}

inline Design hull_white_design(bool relaxed, const SampleTable& rows) {
    Design d;
    if (relaxed) d.names.push_back("delta");
    for (const char* nm : {"a", "b", "c"}) d.names.push_back(nm);
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.X.resize(n, static_cast<Eigen::Index>(d.names.size()));
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = rows[static_cast<std::size_t>(i)];
        const double x = regression_x(s);
        const double w = hw_scale(s);
        require_finite(w, "vega/tau", s);
        require_finite(s.delta_bs, "delta", s);
        const double dl = s.delta_bs;
        Eigen::Index j = 0;
        if (relaxed) d.X(i, j++) = dl * x;
        d.X(i, j++) = w * x;
        d.X(i, j++) = w * dl * x;
        d.X(i, j++) = w * dl * dl * x;
        d.y[i] = regression_y(s) - (relaxed ? 0.0 : dl * x);
    }
    return d;
}

inline double sig_tau(const Sample& s) { return s.sqrt_total_implied_variance; }

inline Design semilinear1_design(const SampleTable& rows) {
    Design d;
    d.names = {"a", "b", "c"};
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.X.resize(n, 3);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = rows[static_cast<std::size_t>(i)];
        const double x = regression_x(s);
        require_finite(s.moneyness, "moneyness", s);
        require_finite(sig_tau(s), "sqrt_total_implied_variance", s);
        d.X(i, 0) = s.moneyness * x;
        d.X(i, 1) = sig_tau(s) * x;
        d.X(i, 2) = x;
        d.y[i] = regression_y(s);
    }
    return d;
}

inline FitResult fit_semilinear2(const SampleTable& rows, const std::string& what) {
    // Initial value: probit-style regression of the kind-1 hedge ratio.
    const Design d1 = semilinear1_design(rows);
    const FitResult f1 = ols(d1.X, d1.y, d1.names, what);
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd Z(n, 3);
    Eigen::VectorXd zt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = rows[static_cast<std::size_t>(i)];
        const double dl =
            f1.coefficients[0] * s.moneyness + f1.coefficients[1] * sig_tau(s) + f1.coefficients[2];
        Z(i, 0) = s.moneyness;
        Z(i, 1) = sig_tau(s);
        Z(i, 2) = 1.0;
        zt[i] = norm_inv(std::clamp(dl + s.cp_flag, 0.01, 0.99));
    }
    const FitResult init = ols(Z, zt, d1.names, what);
    Eigen::Vector3d theta(init.coefficients[0], init.coefficients[1], init.coefficients[2]);

    Eigen::VectorXd x(n), y(n);
    Eigen::VectorXi cp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = rows[static_cast<std::size_t>(i)];
        x[i] = regression_x(s);
        y[i] = regression_y(s);
        cp[i] = s.cp_flag;
    }
    auto residuals = [&](const Eigen::Vector3d& th, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        const Eigen::VectorXd z = Z * th;
        for (Eigen::Index i = 0; i < n; ++i) {
            r[i] = (norm_cdf(z[i]) - cp[i]) * x[i] - y[i];
            if (J) J->row(i) = norm_pdf(z[i]) * x[i] * Z.row(i);
        }
        return r.squaredNorm();
    };

    Eigen::VectorXd r(n), r_try(n);
    Eigen::MatrixXd J(n, 3);
    double sse = residuals(theta, r, &J);
    int it = 0;
    bool converged = false;
    for (; it < 200; ++it) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
        if (qr.rank() < 3) throw FitError(what + ": singular Jacobian in Gauss-Newton");
        const Eigen::Vector3d step = qr.solve(-r);
        double t = 1.0;
        bool improved = false;
        Eigen::Vector3d candidate;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            candidate = theta + t * step;
            const double s_try = residuals(candidate, r_try, nullptr);
            if (s_try <= sse) {
                improved = true;
                sse = s_try;
                break;
            }
        }
        if (!improved || (t * step).norm() < 1e-8) {
            if (improved) theta = candidate;
            converged = true;
            break;
        }
        theta = candidate;
        sse = residuals(theta, r, &J);
    }
    if (!converged) {
        std::ostringstream msg;
        msg << what << ": Gauss-Newton did not converge in 200 iterations; last iterate (" << theta[0] << ", "
            << theta[1] << ", " << theta[2] << ")";
        throw FitError(msg.str());
    }
    sse = residuals(theta, r, &J);
    const Eigen::Matrix3d cov = (J.transpose() * J).inverse();
    FitResult out;
    out.names = d1.names;
    out.residual_sse = sse;
    out.n_samples = static_cast<long>(n);
    out.iterations = it + 1;
    const double sigma2 = n > 3 ? sse / static_cast<double>(n - 3) : 0.0;
    for (int j = 0; j < 3; ++j) {
        out.coefficients.push_back(theta[j]);
        out.standard_errors.push_back(std::sqrt(std::max(sigma2 * cov(j, j), 0.0)));
    }
    return out;
}

inline FitResult fit_one(const HedgeModel& m, const SampleTable& rows, const std::string& what) {
    switch (m.kind) {
        case ModelKind::linear: {
            const Design d = linear_design(m, rows);
            return ols(d.X, d.y, d.names, what);
        }
        case ModelKind::hull_white: {
            const Design d = hull_white_design(m.relaxed, rows);
            return ols(d.X, d.y, d.names, what);
        }
        case ModelKind::semilinear: {
            if (m.semilinear_kind == 2) return fit_semilinear2(rows, what);
            const Design d = semilinear1_design(rows);
            return ols(d.X, d.y, d.names, what);
        }
        default: throw StateError(what + ": model has nothing to fit");
    }
}

} // namespace detail

/// Fits a regression model separately on calls and puts. Models without
/// coefficients are returned unchanged.
inline HedgeModel fit(HedgeModel m, const SampleTable& train) {
    if (!m.needs_fit()) return m;
    for (int cp : {0, 1}) {
        const SampleTable rows = filter_class(train, cp == 0 ? CpClass::calls : CpClass::puts);
        const std::string what = m.name + " (" + (cp == 0 ? "calls" : "puts") + ")";
        m.fits[static_cast<std::size_t>(cp)] = detail::fit_one(m, rows, what);
    }
    return m;
}

/// Ordinary sensitivity regression per cp class.
inline std::array<FitResult, 2> fit_linear(const SampleTable& train, const std::vector<Sensitivity>& sensitivities,
                                           bool intercept = false, bool delta_offset = false) {
    HedgeModel m;
    m.kind = ModelKind::linear;
    m.name = "linear";
    m.sensitivities = sensitivities;
    m.intercept = intercept;
    m.delta_offset = delta_offset;
    m = fit(std::move(m), train);
    return {*m.fits[0], *m.fits[1]};
}

inline std::array<FitResult, 2> fit_hull_white(const SampleTable& train, bool relaxed) {
    HedgeModel m = make_model(relaxed ? "relaxed_hull_white" : "hull_white");
    m = fit(std::move(m), train);
    return {*m.fits[0], *m.fits[1]};
}

inline std::array<FitResult, 2> fit_semilinear(const SampleTable& train, int kind) {
    if (kind != 1 && kind != 2) throw ParameterError("semilinear kind must be 1 or 2");
    HedgeModel m = make_model(kind == 1 ? "semilinear_1" : "semilinear_2");
    m = fit(std::move(m), train);
    return {*m.fits[0], *m.fits[1]};
}

// ---------------------------------------------------------------------------
// Hedge ratios

struct HedgeRatio {
    double delta = 0.0;
    double eta = 0.0;  ///< units of the one-month ATM call (two-instrument hedge only)
};

/// Reuses Heston characteristic-function slices across samples that share
/// (S0, Y0, tau); one slice triple per key (Y - h, Y, Y + h).
class HestonGreeksCache {
public:
    HestonSensitivities get(const HestonParams& p, const HestonQuadrature& q, double S, double Y, double K,
                            double tau, double r, OptionKind kind) {
        const auto key = std::make_tuple(S, Y, tau);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            if (cache_.size() > 4096) cache_.clear();
            const double h = kVarianceBumpRelative * Y;
            it = cache_
                     .emplace(key, Entry{HestonSlice(p, S, Y, tau, r, q), HestonSlice(p, S, Y + h, tau, r, q),
                                         HestonSlice(p, S, Y - h, tau, r, q), h})
                     .first;
        }
        const Entry& e = it->second;
        HestonSensitivities out;
        out.delta = e.mid.price_and_delta(K, kind).second;
        out.nu = (e.up.price(K, kind) - e.dn.price(K, kind)) / (2.0 * e.h);
        return out;
    }

private:
    struct Entry {
        HestonSlice mid, up, dn;
        double h;
    };
    std::map<std::tuple<double, double, double>, Entry> cache_;
};

namespace detail {

inline HestonSensitivities heston_sens(const HedgeModel& m, const Sample& s, double K, double tau,
                                       HestonGreeksCache* cache) {
    if (!std::isfinite(s.Y0)) throw InputError("Heston hedge: sample " + std::to_string(s.index) + " has no Y0");
    const double Y = std::max(s.Y0, 1e-10);
    if (cache) return cache->get(*m.heston, m.quadrature, s.S0, Y, K, tau, s.r, s.kind());
    return heston_delta_vega(*m.heston, s.S0, Y, K, tau, s.r, s.kind(), m.quadrature);
}

inline const FitResult& fitted(const HedgeModel& m, const Sample& s) {
    const auto& f = m.fits[static_cast<std::size_t>(s.cp_flag)];
    if (!f || f->coefficients.empty())
        throw StateError("model '" + m.name + "' has not been fitted for " + (s.cp_flag ? "puts" : "calls"));
    return *f;
}

} // namespace detail

/// delta_HS + nu_HS * rho * sigma_Y / S0
inline double heston_adjusted_delta(const Sample& s, const HestonParams& params, HestonQuadrature quad = {},
                                    HestonGreeksCache* cache = nullptr) {
    HedgeModel m;
    m.heston = params;
    m.quadrature = quad;
    const auto g = detail::heston_sens(m, s, s.strike, s.tau, cache);
    return g.delta + g.nu * params.rho * params.sigma_y / s.S0;
}

inline HedgeRatio hedge_ratio(const HedgeModel& m, const Sample& s, HestonGreeksCache* cache = nullptr) {
    switch (m.kind) {
        case ModelKind::zero: return {};
        case ModelKind::bs_delta: return {s.delta_bs};
        case ModelKind::fixed: return {(s.cp_flag == 1 ? m.f_put : m.f_call) * s.delta_bs};
        case ModelKind::linear: {
            const auto& f = detail::fitted(m, s);
            const bool offset = m.delta_offset && std::find(m.sensitivities.begin(), m.sensitivities.end(),
                                                            Sensitivity::delta) == m.sensitivities.end();
            double d = offset ? s.delta_bs : 0.0;
            std::size_t j = 0;
            for (auto k : m.sensitivities) d += f.coefficients[j++] * sensitivity_value(s, k);
            if (m.intercept) d += f.coefficients[j];
            return {d};
        }
        case ModelKind::hull_white: {
            const auto& f = detail::fitted(m, s);
            const std::size_t o = m.relaxed ? 1 : 0;
            const double lead = m.relaxed ? f.coefficients[0] : 1.0;
            const double dl = s.delta_bs;
            return {lead * dl + detail::hw_scale(s) *
                                    (f.coefficients[o] + f.coefficients[o + 1] * dl + f.coefficients[o + 2] * dl * dl)};
        }
        case ModelKind::semilinear: {
            const auto& f = detail::fitted(m, s);
            const double z =
                f.coefficients[0] * s.moneyness + f.coefficients[1] * detail::sig_tau(s) + f.coefficients[2];
            if (m.semilinear_kind == 2) return {norm_cdf(z) - s.cp_flag};
            return {z};
        }
        case ModelKind::heston_adjusted: {
            if (!m.heston) throw StateError("heston_adjusted requires Heston parameters");
            return {heston_adjusted_delta(s, *m.heston, m.quadrature, cache)};
        }
        case ModelKind::delta_vega_neutral: {
            if (!m.heston) throw StateError("delta_vega_neutral requires Heston parameters");
            if (!std::isfinite(s.atm_strike))
                throw InputError("delta_vega_neutral: sample " + std::to_string(s.index) + " has no ATM instrument");
            const auto g = detail::heston_sens(m, s, s.strike, s.tau, cache);
            Sample atm = s;
            atm.cp_flag = 0;
            const auto ga = detail::heston_sens(m, atm, s.atm_strike, m.atm_tenor, cache);
            const double eta = g.nu / ga.nu;
            return {g.delta - eta * ga.delta, eta};
        }
    }
    return {};
}

/// Hedge ratios for a whole table, sharing Heston slices between rows.
inline std::vector<HedgeRatio> hedge_ratios(const HedgeModel& m, const SampleTable& table) {
    HestonGreeksCache cache;
    std::vector<HedgeRatio> out;
    out.reserve(table.size());
    for (const auto& s : table) out.push_back(hedge_ratio(m, s, &cache));
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json fit_to_json(const FitResult& f) {
    return {{"names", f.names},
            {"coefficients", f.coefficients},
            {"standard_errors", f.standard_errors},
            {"residual_sse", f.residual_sse},
            {"n_samples", f.n_samples},
            {"iterations", f.iterations}};
}

inline FitResult fit_from_json(const nlohmann::json& j) {
    FitResult f;
    f.names = j.at("names").get<std::vector<std::string>>();
    f.coefficients = j.at("coefficients").get<std::vector<double>>();
    f.standard_errors = j.at("standard_errors").get<std::vector<double>>();
    f.residual_sse = j.at("residual_sse").get<double>();
    f.n_samples = j.at("n_samples").get<long>();
    f.iterations = j.value("iterations", 0);
    if (f.coefficients.size() != f.names.size() || f.standard_errors.size() != f.names.size())
        throw InputError("fit JSON: coefficient lengths do not match");
    return f;
}

inline nlohmann::json model_to_json(const HedgeModel& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["variant"] = to_string(m.kind);
    j["window_id"] = m.window_id;
    switch (m.kind) {
        case ModelKind::fixed:
            j["f_call"] = m.f_call;
            j["f_put"] = m.f_put;
            break;
        case ModelKind::linear: {
            std::vector<std::string> sens;
            for (auto k : m.sensitivities) sens.push_back(to_string(k));
            j["sensitivities"] = sens;
            j["delta_offset"] = m.delta_offset;
            j["intercept"] = m.intercept;
            break;
        }
        case ModelKind::hull_white: j["relaxed"] = m.relaxed; break;
        case ModelKind::semilinear: j["kind"] = m.semilinear_kind; break;
        case ModelKind::heston_adjusted:
        case ModelKind::delta_vega_neutral:
            if (m.heston) {
                const auto& p = *m.heston;
                j["heston"] = {{"s0", p.s0},       {"y0", p.y0},           {"theta", p.theta},
                               {"kappa", p.kappa}, {"sigma_y", p.sigma_y}, {"rho", p.rho}};
            }
            j["atm_tenor"] = m.atm_tenor;
            break;
        default: break;
    }
    if (m.needs_fit()) {
        nlohmann::json fits = nlohmann::json::object();
        for (int cp : {0, 1})
            if (m.fits[static_cast<std::size_t>(cp)])
                fits[cp == 0 ? "calls" : "puts"] = fit_to_json(*m.fits[static_cast<std::size_t>(cp)]);
        j["fits"] = fits;
    }
    return j;
}

inline HedgeModel model_from_json(const nlohmann::json& j) {
    try {
        HedgeModel m;
        m.name = j.at("name").get<std::string>();
        m.kind = parse_model_kind(j.at("variant").get<std::string>());
        m.window_id = j.value("window_id", 0);
        m.f_call = j.value("f_call", 0.9);
        m.f_put = j.value("f_put", 1.1);
        if (j.contains("sensitivities"))
            for (const auto& s : j.at("sensitivities")) m.sensitivities.push_back(parse_sensitivity(s.get<std::string>()));
        m.delta_offset = j.value("delta_offset", false);
        m.intercept = j.value("intercept", false);
        m.relaxed = j.value("relaxed", false);
        m.semilinear_kind = j.value("kind", 1);
        m.atm_tenor = j.value("atm_tenor", 1.0 / 12.0);
        if (j.contains("heston")) {
            const auto& h = j.at("heston");
            HestonParams p;
            p.s0 = h.at("s0");
            p.y0 = h.at("y0");
            p.theta = h.at("theta");
            p.kappa = h.at("kappa");
            p.sigma_y = h.at("sigma_y");
            p.rho = h.at("rho");
            m.heston = p;
        }
        if (j.contains("fits")) {
            const auto& f = j.at("fits");
            if (f.contains("calls")) m.fits[0] = fit_from_json(f.at("calls"));
            if (f.contains("puts")) m.fits[1] = fit_from_json(f.at("puts"));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model JSON: ") + e.what());
    }
}

} // namespace deltabench
