#pragma once

// HedgeNet: a small ReLU network producing a clamped hedge ratio, composed
// with the replication portfolio C1_hat = delta S1 + R (C0 - delta S0).

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "sample.hpp"

namespace deltabench {

enum class FeatureSet { m_sigtau, delta_vega_tau, delta_vega_vanna_tau };

inline const char* to_string(FeatureSet f) {
    switch (f) {
        case FeatureSet::m_sigtau: return "M_sigtau";
        case FeatureSet::delta_vega_tau: return "delta_vega_tau";
        case FeatureSet::delta_vega_vanna_tau: return "delta_vega_vanna_tau";
    }
    return "?";
}

inline FeatureSet parse_feature_set(const std::string& s) {
    for (auto f : {FeatureSet::m_sigtau, FeatureSet::delta_vega_tau, FeatureSet::delta_vega_vanna_tau})
        if (s == to_string(f)) return f;
    throw ConfigError("unknown feature set '" + s + "'");
}

inline std::vector<std::string> feature_names(FeatureSet f) {
    switch (f) {
        case FeatureSet::m_sigtau: return {"moneyness", "sqrt_total_implied_variance", "cp_flag"};
        case FeatureSet::delta_vega_tau: return {"delta_bs", "vega_bs", "inv_sqrt_tau", "cp_flag"};
        case FeatureSet::delta_vega_vanna_tau: return {"delta_bs", "vega_bs", "vanna_bs", "inv_sqrt_tau", "cp_flag"};
    }
    return {};
}

inline Eigen::Index input_dim(FeatureSet f) { return static_cast<Eigen::Index>(feature_names(f).size()); }

inline Eigen::VectorXd extract_features(const Sample& s, FeatureSet f) {
    Eigen::VectorXd x(input_dim(f));
    const double cp = s.cp_flag;
    switch (f) {
        case FeatureSet::m_sigtau: x << s.moneyness, s.sqrt_total_implied_variance, cp; break;
        case FeatureSet::delta_vega_tau: x << s.delta_bs, s.vega_bs, 1.0 / std::sqrt(s.tau), cp; break;
        case FeatureSet::delta_vega_vanna_tau:
            x << s.delta_bs, s.vega_bs, s.vanna_bs, 1.0 / std::sqrt(s.tau), cp;
            break;
    }
    if (!x.allFinite())
        throw InputError("HedgeNet: sample " + std::to_string(s.index) + " lacks features for " + to_string(f));
    return x;
}

/// Default L2 strengths for the simulated datasets.
inline double default_alpha(bool heston, int horizon_days, FeatureSet f) {
    if (f == FeatureSet::m_sigtau) return 1e-4;
    if (heston || horizon_days >= 2) return 1e-3;
    return 1e-4;
}

struct NetConfig {
    FeatureSet feature_set = FeatureSet::delta_vega_tau;
    std::vector<int> hidden = {30, 30};
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 64;
    int epochs = 300;
    double l2_alpha = 1e-4;
    RngSeed seed = 1;
    int patience = 0;  ///< stop after this many epochs without improvement; 0 runs all epochs
};

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return (x - mean).cwiseQuotient(std); }
    Eigen::VectorXd invert(const Eigen::VectorXd& z) const { return z.cwiseProduct(std) + mean; }
};

/// Column-wise mean and population std; a constant feature (std at rounding
/// level) gets std 1.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& X) {
    Standardizer st;
    const double n = static_cast<double>(X.cols());
    st.mean = X.rowwise().sum() / n;
    st.std = ((X.colwise() - st.mean).array().square().rowwise().sum() / n).sqrt().matrix();
    for (Eigen::Index i = 0; i < st.std.size(); ++i)
        if (!(st.std[i] > 1e-12 * std::max(1.0, std::abs(st.mean[i])))) st.std[i] = 1.0;
    return st;
}

struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
};

struct TrainedNet {
    NetConfig net;
    TrainConfig train;
    Standardizer standardizer;
    std::vector<Layer> layers;
    int best_epoch = 0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    double dead_gradient_fraction = 0.0;  ///< share of samples outside the clamp in the final epoch
};

/// Samples in matrix form: standardized features as columns plus the
/// quantities of the replication transform.
struct NetBatch {
    Eigen::MatrixXd X;
    Eigen::RowVectorXd S0, S1, C0, C1, R, cp;

    Eigen::Index size() const { return X.cols(); }
};

inline NetBatch make_batch(const SampleTable& table, FeatureSet f, const Standardizer* st = nullptr) {
    NetBatch b;
    const auto n = static_cast<Eigen::Index>(table.size());
    b.X.resize(input_dim(f), n);
    for (auto* v : {&b.S0, &b.S1, &b.C0, &b.C1, &b.R, &b.cp}) v->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = table[static_cast<std::size_t>(i)];
        b.X.col(i) = extract_features(s, f);
        b.S0[i] = s.S0;
        b.S1[i] = s.S1;
        b.C0[i] = s.C0;
        b.C1[i] = s.C1;
        b.R[i] = s.growth();
        b.cp[i] = s.cp_flag;
    }
    if (st) b.X = (b.X.colwise() - st->mean).array().colwise() / st->std.array();
    return b;
}

inline NetBatch select_columns(const NetBatch& in, const std::vector<Eigen::Index>& idx) {
    NetBatch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    b.X.resize(in.X.rows(), n);
    for (auto* v : {&b.S0, &b.S1, &b.C0, &b.C1, &b.R, &b.cp}) v->resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = idx[static_cast<std::size_t>(k)];
        b.X.col(k) = in.X.col(i);
        b.S0[k] = in.S0[i];
        b.S1[k] = in.S1[i];
        b.C0[k] = in.C0[i];
        b.C1[k] = in.C1[i];
        b.R[k] = in.R[i];
        b.cp[k] = in.cp[i];
    }
    return b;
}

inline std::vector<Layer> init_layers(Eigen::Index in_dim, const std::vector<int>& hidden, RngSeed seed) {
    Rng rng(seed);
    std::vector<Layer> layers;
    Eigen::Index fan_in = in_dim;
    std::vector<int> widths = hidden;
    widths.push_back(1);
    for (int w : widths) {
        if (w <= 0) throw ConfigError("HedgeNet: layer widths must be positive");
        Layer l;
        l.W.resize(w, fan_in);
        l.b = Eigen::VectorXd::Zero(w);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + w));
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = bound * (2.0 * rng.uniform() - 1.0);
        layers.push_back(std::move(l));
        fan_in = w;
    }
    return layers;
}

/// Raw (pre-clamp) network output for standardized inputs.
inline Eigen::RowVectorXd network_output(const std::vector<Layer>& layers, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = (layers[l].W * a).colwise() + layers[l].b;
        a = l + 1 < layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return a.row(0);
}

/// Effective hedge ratio delta_raw - cp_flag with delta_raw clamped to [0, 1].
inline Eigen::RowVectorXd net_deltas(const std::vector<Layer>& layers, const NetBatch& b) {
    return network_output(layers, b.X).cwiseMax(0.0).cwiseMin(1.0) - b.cp;
}

inline Eigen::RowVectorXd replicate(const Eigen::RowVectorXd& delta, const NetBatch& b) {
    return delta.cwiseProduct(b.S1) + b.R.cwiseProduct(b.C0 - delta.cwiseProduct(b.S0));
}

struct LossParts {
    double data = 0.0;     ///< mean squared replication error
    double penalty = 0.0;  ///< alpha * sum of squared weights
    long clamped = 0;      ///< samples whose output lies outside (0, 1)
};

/// Loss of a batch and, when `grads` is given, its gradient (same shapes as
/// the layers).
inline LossParts loss_and_grad(const std::vector<Layer>& layers, const NetBatch& b, double alpha,
                               std::vector<Layer>* grads) {
    const std::size_t L = layers.size();
    std::vector<Eigen::MatrixXd> acts(L + 1);
    std::vector<Eigen::MatrixXd> pre(L);
    acts[0] = b.X;
    for (std::size_t l = 0; l < L; ++l) {
        pre[l] = (layers[l].W * acts[l]).colwise() + layers[l].b;
        acts[l + 1] = l + 1 < L ? Eigen::MatrixXd(pre[l].cwiseMax(0.0)) : pre[l];
    }
    const Eigen::RowVectorXd o = acts[L].row(0);
    const Eigen::RowVectorXd delta = o.cwiseMax(0.0).cwiseMin(1.0) - b.cp;
    const Eigen::RowVectorXd err = replicate(delta, b) - b.C1;
    const double n = static_cast<double>(b.size());

    LossParts out;
    out.data = err.squaredNorm() / n;
    for (const auto& l : layers) out.penalty += alpha * l.W.squaredNorm();
    Eigen::RowVectorXd inside(o.size());
    for (Eigen::Index i = 0; i < o.size(); ++i) {
        inside[i] = (o[i] > 0.0 && o[i] < 1.0) ? 1.0 : 0.0;
        if (inside[i] == 0.0) ++out.clamped;
    }
    if (!grads) return out;

    grads->resize(L);
    Eigen::MatrixXd g = (2.0 / n * err.cwiseProduct(b.S1 - b.R.cwiseProduct(b.S0))).cwiseProduct(inside);
    for (std::size_t l = L; l-- > 0;) {
        (*grads)[l].W = g * acts[l].transpose() + 2.0 * alpha * layers[l].W;
        (*grads)[l].b = g.rowwise().sum();
        if (l > 0) {
            g = layers[l].W.transpose() * g;
            g = g.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

inline double data_loss(const std::vector<Layer>& layers, const NetBatch& b) {
    constexpr Eigen::Index chunk = 8192;
    double sse = 0.0;
    for (Eigen::Index start = 0; start < b.size(); start += chunk) {
        const Eigen::Index m = std::min(chunk, b.size() - start);
        NetBatch part;
        part.X = b.X.middleCols(start, m);
        part.S0 = b.S0.segment(start, m);
        part.S1 = b.S1.segment(start, m);
        part.C0 = b.C0.segment(start, m);
        part.C1 = b.C1.segment(start, m);
        part.R = b.R.segment(start, m);
        part.cp = b.cp.segment(start, m);
        sse += (replicate(net_deltas(layers, part), part) - part.C1).squaredNorm();
    }
    return sse / static_cast<double>(b.size());
}

struct NetOutput {
    double delta = 0.0;
    double c1_hat = 0.0;
};

inline NetOutput forward(const TrainedNet& net, const Sample& s) {
    if (std::abs(s.S0 - 100.0) > 1e-9) throw InputError("HedgeNet: sample is not normalized (S0 != 100)");
    const Eigen::VectorXd z = net.standardizer.apply(extract_features(s, net.net.feature_set));
    const double raw = std::clamp(network_output(net.layers, z)[0], 0.0, 1.0);
    NetOutput out;
    out.delta = raw - s.cp_flag;
    out.c1_hat = out.delta * s.S1 + s.growth() * (s.C0 - out.delta * s.S0);
    return out;
}

inline std::vector<double> net_hedge_ratios(const TrainedNet& net, const SampleTable& table) {
    for (const auto& s : table)
        if (std::abs(s.S0 - 100.0) > 1e-9) throw InputError("HedgeNet: sample is not normalized (S0 != 100)");
    const NetBatch b = make_batch(table, net.net.feature_set, &net.standardizer);
    const Eigen::RowVectorXd d = net_deltas(net.layers, b);
    return {d.data(), d.data() + d.size()};
}

namespace detail {

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    std::vector<Layer> m, v;

    explicit Adam(const std::vector<Layer>& layers, double learning_rate) : lr(learning_rate) {
        for (const auto& l : layers) {
            m.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
            v.push_back(m.back());
        }
    }

    /// Moments decaying below 1e-150 (zero-gradient units) are stored as zero,
    /// keeping the arithmetic out of the subnormal range.
    template <typename Expr>
    static auto flush(const Expr& e) {
        return (e.array().abs() < 1e-150).select(0.0, e.array()).matrix().eval();
    }

    void step(std::vector<Layer>& layers, const std::vector<Layer>& g) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t l = 0; l < layers.size(); ++l) {
            m[l].W = flush(beta1 * m[l].W + (1.0 - beta1) * g[l].W);
            v[l].W = flush(beta2 * v[l].W + (1.0 - beta2) * g[l].W.cwiseAbs2());
            m[l].b = flush(beta1 * m[l].b + (1.0 - beta1) * g[l].b);
            v[l].b = flush(beta2 * v[l].b + (1.0 - beta2) * g[l].b.cwiseAbs2());
            layers[l].W.array() -= lr * (m[l].W.array() / c1) / ((v[l].W.array() / c2).sqrt() + eps);
            layers[l].b.array() -= lr * (m[l].b.array() / c1) / ((v[l].b.array() / c2).sqrt() + eps);
        }
    }
};

inline void shuffle(std::vector<Eigen::Index>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace detail

/// Adam on mean squared replication error plus an L2 weight penalty; the
/// returned parameters are those of the epoch with the lowest validation loss.
inline TrainedNet train(const SampleTable& train_table, const SampleTable& val_table, const NetConfig& net_cfg,
                        const TrainConfig& cfg) {
    if (train_table.empty()) throw ConfigError("HedgeNet: empty training set");
    if (val_table.empty()) throw ConfigError("HedgeNet: empty validation set");
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size <= 0 || cfg.epochs <= 0 || !(cfg.l2_alpha >= 0.0))
        throw ConfigError("HedgeNet: learning rate, batch size and epochs must be positive");
    for (const auto* t : {&train_table, &val_table})
        for (const auto& s : *t)
            if (std::abs(s.S0 - 100.0) > 1e-9) throw InputError("HedgeNet: training data is not normalized");

    TrainedNet net;
    net.net = net_cfg;
    net.train = cfg;
    NetBatch tr = make_batch(train_table, net_cfg.feature_set);
    net.standardizer = fit_standardizer(tr.X);
    tr.X = (tr.X.colwise() - net.standardizer.mean).array().colwise() / net.standardizer.std.array();
    const NetBatch va = make_batch(val_table, net_cfg.feature_set, &net.standardizer);

    std::vector<Layer> layers = init_layers(input_dim(net_cfg.feature_set), net_cfg.hidden, derive_seed(cfg.seed, 0));
    detail::Adam adam(layers, cfg.learning_rate);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(tr.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

    double best = std::numeric_limits<double>::infinity();
    std::vector<Layer> grads;
    std::vector<Eigen::Index> idx;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        detail::shuffle(order, rng);
        double sse = 0.0;
        long clamped = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
            const NetBatch b = select_columns(tr, idx);
            const LossParts lp = loss_and_grad(layers, b, cfg.l2_alpha, &grads);
            sse += lp.data * static_cast<double>(b.size());
            clamped += lp.clamped;
            adam.step(layers, grads);
        }
        net.train_loss.push_back(sse / static_cast<double>(tr.size()));
        net.dead_gradient_fraction = static_cast<double>(clamped) / static_cast<double>(tr.size());
        const double vl = data_loss(layers, va);
        if (!std::isfinite(vl)) throw NumericalError("HedgeNet: validation loss diverged at epoch " + std::to_string(epoch));
        net.val_loss.push_back(vl);
        if (vl < best) {
            best = vl;
            net.best_epoch = epoch;
            net.layers = layers;
        }
        if (cfg.patience > 0 && epoch - net.best_epoch >= cfg.patience) break;
    }
    return net;
}

/// Largest relative difference between backpropagated gradients and
/// central finite differences over all parameters (default step ~ eps^(1/3)).
inline double grad_check(const std::vector<Layer>& layers, const NetBatch& batch, double alpha = 0.0,
                         double h = 1e-5) {
    std::vector<Layer> grads;
    loss_and_grad(layers, batch, alpha, &grads);
    std::vector<Layer> probe = layers;
    auto total = [&]() {
        const LossParts lp = loss_and_grad(probe, batch, alpha, nullptr);
        return lp.data + lp.penalty;
    };
    double worst = 0.0;
    auto compare = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = total();
        param = saved - h;
        const double dn = total();
        param = saved;
        const double numeric = (up - dn) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t l = 0; l < probe.size(); ++l) {
        for (Eigen::Index r = 0; r < probe[l].W.rows(); ++r)
            for (Eigen::Index c = 0; c < probe[l].W.cols(); ++c) compare(probe[l].W(r, c), grads[l].W(r, c));
        for (Eigen::Index r = 0; r < probe[l].b.size(); ++r) compare(probe[l].b[r], grads[l].b[r]);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json net_to_json(const TrainedNet& net) {
    nlohmann::json j;
    j["feature_set"] = to_string(net.net.feature_set);
    j["features"] = feature_names(net.net.feature_set);
    j["hidden"] = net.net.hidden;
    j["train_config"] = {{"learning_rate", net.train.learning_rate}, {"batch_size", net.train.batch_size},
                         {"epochs", net.train.epochs},               {"l2_alpha", net.train.l2_alpha},
                         {"seed", net.train.seed},                   {"patience", net.train.patience}};
    j["standardizer"] = {{"mean", std::vector<double>(net.standardizer.mean.data(),
                                                      net.standardizer.mean.data() + net.standardizer.mean.size())},
                         {"std", std::vector<double>(net.standardizer.std.data(),
                                                     net.standardizer.std.data() + net.standardizer.std.size())}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.push_back(l.W(r, c));
        layers.push_back({{"rows", l.W.rows()},
                          {"cols", l.W.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    j["layers"] = layers;
    j["best_epoch"] = net.best_epoch;
    j["train_loss"] = net.train_loss;
    j["val_loss"] = net.val_loss;
    j["dead_gradient_fraction"] = net.dead_gradient_fraction;
    return j;
}

inline TrainedNet net_from_json(const nlohmann::json& j) {
    try {
        TrainedNet net;
        net.net.feature_set = parse_feature_set(j.at("feature_set").get<std::string>());
        net.net.hidden = j.at("hidden").get<std::vector<int>>();
        const auto& tc = j.at("train_config");
        net.train.learning_rate = tc.at("learning_rate");
        net.train.batch_size = tc.at("batch_size");
        net.train.epochs = tc.at("epochs");
        net.train.l2_alpha = tc.at("l2_alpha");
        net.train.seed = tc.at("seed");
        net.train.patience = tc.value("patience", 0);
        const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
        const auto sd = j.at("standardizer").at("std").get<std::vector<double>>();
        net.standardizer.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        net.standardizer.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
        for (const auto& jl : j.at("layers")) {
            Layer l;
            const auto rows = jl.at("rows").get<Eigen::Index>();
            const auto cols = jl.at("cols").get<Eigen::Index>();
            const auto w = jl.at("weights").get<std::vector<double>>();
            const auto b = jl.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
                throw InputError("net JSON: layer shape mismatch");
            l.W.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) l.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
            l.b = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
            net.layers.push_back(std::move(l));
        }
        net.best_epoch = j.at("best_epoch");
        net.train_loss = j.at("train_loss").get<std::vector<double>>();
        net.val_loss = j.at("val_loss").get<std::vector<double>>();
        net.dead_gradient_fraction = j.value("dead_gradient_fraction", 0.0);
        if (net.standardizer.mean.size() != input_dim(net.net.feature_set))
            throw InputError("net JSON: standardizer does not match the feature set");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("net JSON: ") + e.what());
    }
}

} // namespace deltabench
