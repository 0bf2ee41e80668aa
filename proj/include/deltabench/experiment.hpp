#pragma once

// Experiment configuration and the end-to-end pipelines behind the CLI:
// simulate -> list -> build -> clean -> split -> fit/train -> evaluate.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "calendar.hpp"
#include "datapipe.hpp"
#include "error.hpp"
#include "evaluator.hpp"
#include "hedgenet.hpp"
#include "hedgers.hpp"
#include "listings.hpp"
#include "simkit.hpp"

namespace deltabench {

// ---------------------------------------------------------------------------
// Configuration

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"model", "bs", "data-generating model: bs or heston"},
        {"s0", "2000", "initial spot"},
        {"mu", "0.1", "GBM drift"},
        {"sigma", "0.2", "GBM volatility"},
        {"y0", "0.04", "Heston initial variance"},
        {"theta", "0.04", "Heston long-run variance"},
        {"kappa", "5", "Heston mean-reversion rate"},
        {"sigma_y", "0.3", "Heston vol-of-variance"},
        {"rho", "-0.6", "Heston correlation"},
        {"steps_per_day", "10", "Heston substeps per trading day"},
        {"scheme", "milstein", "Heston scheme: euler or milstein"},
        {"start_date", "2018-01-02", "first trading day of the simulated calendar"},
        {"in_sample_days", "450", "in-sample trading days (train + validation)"},
        {"train_days", "360", "training days within the in-sample span"},
        {"oos_sets", "20", "number of out-of-sample paths"},
        {"oos_days", "90", "trading days per out-of-sample path"},
        {"horizons", "1d,2d", "hedging periods"},
        {"seed", "1", "master seed"},
        {"r_onr", "0", "overnight rate"},
        {"roster", "auto", "comma-separated hedging models; auto = benchmark roster for the model"},
        {"anns", "M_sigtau,delta_vega_tau,delta_vega_vanna_tau", "HedgeNet feature sets (empty for none)"},
        {"ann_epochs", "300", "training epochs"},
        {"ann_learning_rate", "1e-4", "Adam learning rate"},
        {"ann_batch_size", "64", "minibatch size"},
        {"ann_alpha", "auto", "L2 strength; auto = per-dataset default"},
        {"ann_patience", "0", "early-stopping patience in epochs (0 = train all epochs)"},
        {"ann_seeds", "1", "training runs per net; the lowest validation loss is kept"},
        {"fixed_call", "0.9", "fixed strategy factor for calls"},
        {"fixed_put", "1.1", "fixed strategy factor for puts"},
        {"intercept", "false", "add an intercept to sensitivity regressions"},
        {"clean_tau_min", "true", "drop samples with less than one day to expiry"},
        {"clean_moneyness", "true", "drop samples outside the moneyness range"},
        {"clean_otm_only", "true", "drop in-the-money samples"},
        {"clean_missing_next", "true", "drop samples without an end-of-period price"},
        {"clean_min_price", "true", "drop prices below one tick"},
        {"clean_negative_time_value", "true", "drop prices below intrinsic value"},
        {"clean_implied_vol", "true", "drop implied volatilities outside the range"},
        {"clean_quote_rules", "true", "volume / spread / bid rules for quote data"},
        {"moneyness_lo", "0.8", "lower moneyness bound"},
        {"moneyness_hi", "1.5", "upper moneyness bound"},
        {"iv_lo", "0.01", "lower implied-volatility bound"},
        {"iv_hi", "1.0", "upper implied-volatility bound"},
        {"filter_tau_min", "", "drop samples with at most this many calendar days to expiry"},
        {"bucket_moneyness", "false", "also report near-the-money / out-of-the-money buckets"},
        {"window_mode", "rolling", "window split for sample-table data: rolling or single"},
        {"rolling_in_sample_days", "900", "rolling window in-sample length"},
        {"rolling_test_days", "180", "rolling window test length"},
        {"rolling_roll_days", "180", "rolling window step"},
        {"tolerance_min", "6", "tick matching tolerance in minutes"},
        {"tick_horizon", "1d", "tick matching horizon: 1h, 1d or 2d"},
        {"diagnostics", "true", "write pairwise intervals, leverage and bucket diagnostics"},
    };
    return keys;
}

/// Flat key=value configuration. Unknown keys are errors.
class ConfigMap {
public:
    ConfigMap() {
        for (const auto& k : config_keys()) values_[k.name] = k.default_value;
    }

    static bool known(const std::string& key) {
        for (const auto& k : config_keys())
            if (k.name == key) return true;
        return false;
    }

    void set(const std::string& key, const std::string& value) {
        if (!known(key)) throw ConfigError("unknown configuration key '" + key + "'");
        values_[key] = value;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
        return it->second;
    }

    /// Parses `key = value` lines; '#' starts a comment.
    void merge_text(const std::string& text, const std::string& source = "config") {
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (!known(key))
                throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown configuration key '" + key + "'");
            values_[key] = trim(line.substr(eq + 1));
        }
    }

    void merge_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        merge_text(ss.str(), path);
    }

    /// Canonical text: one sorted `key = value` line per key.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    /// FNV-1a 64 of the canonical text, as 16 hex digits.
    std::string hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        return os.str();
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            const auto b = cur.find_first_not_of(" \t");
            if (b != std::string::npos) out.push_back(cur.substr(b, cur.find_last_not_of(" \t") - b + 1));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

inline double to_double(const ConfigMap& c, const std::string& key) {
    try {
        return csv::parse_double(c.get(key), key);
    } catch (const Error&) {
        throw ConfigError("configuration key '" + key + "': '" + c.get(key) + "' is not a number");
    }
}

inline long to_int(const ConfigMap& c, const std::string& key) {
    try {
        return static_cast<long>(csv::parse_int(c.get(key), key));
    } catch (const Error&) {
        throw ConfigError("configuration key '" + key + "': '" + c.get(key) + "' is not an integer");
    }
}

inline bool to_bool(const ConfigMap& c, const std::string& key) {
    const auto& v = c.get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("configuration key '" + key + "': '" + v + "' is not a boolean");
}

} // namespace detail

/// Parses "1h", "1d", "2d" (or a bare number of days).
inline TickHorizon parse_horizon(const std::string& s) {
    if (s.empty()) throw ConfigError("empty horizon");
    TickHorizon h;
    std::string num = s;
    if (s.back() == 'h' || s.back() == 'd') {
        h.unit = s.back() == 'h' ? TickHorizon::Unit::hours : TickHorizon::Unit::business_days;
        num = s.substr(0, s.size() - 1);
    }
    try {
        h.count = static_cast<int>(csv::parse_int(num));
    } catch (const Error&) {
        throw ConfigError("invalid horizon '" + s + "'");
    }
    if (h.count <= 0) throw ConfigError("horizon must be positive: '" + s + "'");
    return h;
}

inline std::string horizon_label(int days) { return std::to_string(days) + "d"; }

struct ExperimentConfig {
    bool heston = false;
    GbmParams gbm;
    HestonParams heston_params;
    int steps_per_day = 10;
    Scheme scheme = Scheme::milstein;
    Date start_date = make_date(2018, 1, 2);
    int in_sample_days = 450;
    int train_days = 360;
    int oos_sets = 20;
    int oos_days = 90;
    std::vector<int> horizons = {1, 2};
    RngSeed seed = 1;
    double r_onr = 0.0;
    std::vector<std::string> roster;
    std::vector<FeatureSet> anns;
    TrainConfig train;
    std::optional<double> ann_alpha;
    int ann_seeds = 1;
    double fixed_call = 0.9;
    double fixed_put = 1.1;
    bool intercept = false;
    CleaningRules cleaning;
    bool bucket_moneyness = false;
    SplitMode window_mode = RollingMode{};
    double tolerance_min = 6.0;
    TickHorizon tick_horizon{};
    bool diagnostics = true;

    PricingModel pricing() const {
        if (heston) return HestonPricing{heston_params};
        return BsPricing{gbm.sigma};
    }
};

inline std::vector<std::string> default_roster(bool heston) {
    std::vector<std::string> r = {"zero", "bs_delta"};
    for (const auto& m : regression_roster()) r.push_back(m);
    if (heston) {
        r.push_back("heston_adjusted");
        r.push_back("delta_vega_neutral");
    }
    return r;
}

inline ExperimentConfig resolve_config(const ConfigMap& c) {
    using namespace detail;
    ExperimentConfig cfg;
    const auto& model = c.get("model");
    if (model != "bs" && model != "heston") throw ConfigError("model must be 'bs' or 'heston', got '" + model + "'");
    cfg.heston = model == "heston";
    cfg.gbm = {to_double(c, "s0"), to_double(c, "mu"), to_double(c, "sigma")};
    cfg.heston_params = {to_double(c, "s0"),    to_double(c, "y0"),      to_double(c, "theta"),
                         to_double(c, "kappa"), to_double(c, "sigma_y"), to_double(c, "rho")};
    try {
        cfg.gbm.validate();
        if (cfg.heston) cfg.heston_params.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    cfg.steps_per_day = static_cast<int>(to_int(c, "steps_per_day"));
    const auto& scheme = c.get("scheme");
    if (scheme != "euler" && scheme != "milstein") throw ConfigError("scheme must be 'euler' or 'milstein'");
    cfg.scheme = scheme == "euler" ? Scheme::euler : Scheme::milstein;
    try {
        cfg.start_date = parse_date(c.get("start_date"));
    } catch (const Error&) {
        throw ConfigError("start_date: invalid date '" + c.get("start_date") + "'");
    }
    if (!is_weekday(cfg.start_date)) throw ConfigError("start_date must be a weekday");
    cfg.in_sample_days = static_cast<int>(to_int(c, "in_sample_days"));
    cfg.train_days = static_cast<int>(to_int(c, "train_days"));
    cfg.oos_sets = static_cast<int>(to_int(c, "oos_sets"));
    cfg.oos_days = static_cast<int>(to_int(c, "oos_days"));
    if (cfg.steps_per_day < 1 || cfg.in_sample_days < 2 || cfg.train_days < 1 ||
        cfg.train_days >= cfg.in_sample_days || cfg.oos_sets < 0 || cfg.oos_days < 1)
        throw ConfigError("invalid simulation layout (check in_sample_days, train_days, oos_sets, oos_days)");
    cfg.horizons.clear();
    for (const auto& h : split_list(c.get("horizons"))) {
        const TickHorizon th = parse_horizon(h);
        if (th.unit != TickHorizon::Unit::business_days)
            throw ConfigError("horizons: simulated data supports day horizons only ('" + h + "')");
        cfg.horizons.push_back(th.count);
    }
    if (cfg.horizons.empty()) throw ConfigError("horizons must not be empty");
    cfg.seed = static_cast<RngSeed>(to_int(c, "seed"));
    cfg.r_onr = to_double(c, "r_onr");
    cfg.roster = c.get("roster") == "auto" ? default_roster(cfg.heston) : split_list(c.get("roster"));
    for (const auto& m : cfg.roster) make_model(m);  // validates names
    for (const auto& f : split_list(c.get("anns"))) cfg.anns.push_back(parse_feature_set(f));
    if (cfg.roster.empty() && cfg.anns.empty()) throw ConfigError("roster must not be empty");
    cfg.train.epochs = static_cast<int>(to_int(c, "ann_epochs"));
    cfg.train.learning_rate = to_double(c, "ann_learning_rate");
    cfg.train.batch_size = static_cast<int>(to_int(c, "ann_batch_size"));
    cfg.train.patience = static_cast<int>(to_int(c, "ann_patience"));
    if (c.get("ann_alpha") != "auto") cfg.ann_alpha = to_double(c, "ann_alpha");
    cfg.ann_seeds = static_cast<int>(to_int(c, "ann_seeds"));
    if (cfg.train.epochs < 1 || cfg.train.batch_size < 1 || !(cfg.train.learning_rate > 0.0) || cfg.ann_seeds < 1)
        throw ConfigError("ANN epochs, batch size, learning rate and seeds must be positive");
    cfg.fixed_call = to_double(c, "fixed_call");
    cfg.fixed_put = to_double(c, "fixed_put");
    if (!(cfg.fixed_call > 0.0) || !(cfg.fixed_put > 0.0)) throw ConfigError("fixed factors must be positive");
    cfg.intercept = to_bool(c, "intercept");
    auto& cl = cfg.cleaning;
    cl.tau_min = to_bool(c, "clean_tau_min");
    cl.moneyness = to_bool(c, "clean_moneyness");
    cl.otm_only = to_bool(c, "clean_otm_only");
    cl.missing_next = to_bool(c, "clean_missing_next");
    cl.min_price = to_bool(c, "clean_min_price");
    cl.negative_time_value = to_bool(c, "clean_negative_time_value");
    cl.implied_vol = to_bool(c, "clean_implied_vol");
    cl.quote_rules = to_bool(c, "clean_quote_rules");
    cl.moneyness_lo = to_double(c, "moneyness_lo");
    cl.moneyness_hi = to_double(c, "moneyness_hi");
    cl.iv_lo = to_double(c, "iv_lo");
    cl.iv_hi = to_double(c, "iv_hi");
    if (!c.get("filter_tau_min").empty()) {
        std::string v = c.get("filter_tau_min");
        if (!v.empty() && v.back() == 'd') v.pop_back();
        try {
            cl.tau_filter_calendar_days = csv::parse_double(v);
        } catch (const Error&) {
            throw ConfigError("filter_tau_min: invalid number of days '" + c.get("filter_tau_min") + "'");
        }
    }
    cfg.bucket_moneyness = to_bool(c, "bucket_moneyness");
    const auto& wm = c.get("window_mode");
    if (wm == "rolling") {
        RollingMode rm;
        rm.in_sample_days = static_cast<int>(to_int(c, "rolling_in_sample_days"));
        rm.test_days = static_cast<int>(to_int(c, "rolling_test_days"));
        rm.roll_days = static_cast<int>(to_int(c, "rolling_roll_days"));
        if (rm.in_sample_days < 5 || rm.test_days < 1 || rm.roll_days < 1) throw ConfigError("invalid rolling window");
        cfg.window_mode = rm;
    } else if (wm == "single") {
        cfg.window_mode = SingleMode{};
    } else {
        throw ConfigError("window_mode must be 'rolling' or 'single'");
    }
    cfg.tolerance_min = to_double(c, "tolerance_min");
    if (!(cfg.tolerance_min >= 0.0)) throw ConfigError("tolerance_min must be non-negative");
    cfg.tick_horizon = parse_horizon(c.get("tick_horizon"));
    cfg.diagnostics = to_bool(c, "diagnostics");
    return cfg;
}

// ---------------------------------------------------------------------------
// Simulation study layout

/// In-sample path on days 0..in_sample_days-1 and out-of-sample paths that
/// branch from its terminal state, each covering the next oos_days days.
class SimulationStudy {
public:
    explicit SimulationStudy(ExperimentConfig cfg) : cfg_(std::move(cfg)), calendar_(cfg_.start_date) {
        const int n = cfg_.in_sample_days - 1;
        in_path_ = cfg_.heston ? simulate_heston(cfg_.heston_params, n, cfg_.steps_per_day, cfg_.scheme,
                                                 derive_seed(cfg_.seed, 0))
                               : simulate_gbm(cfg_.gbm, n, derive_seed(cfg_.seed, 0));
        auto uni = generate_option_universe(in_path_, calendar_);
        in_contracts_ = std::move(uni.contracts);
        state_ = std::move(uni.state);
    }

    const ExperimentConfig& config() const { return cfg_; }
    const TradingCalendar& calendar() const { return calendar_; }
    const PricePath& in_sample_path() const { return in_path_; }
    const std::vector<OptionContract>& in_sample_contracts() const { return in_contracts_; }
    std::int64_t oos_first_day() const { return in_path_.last_day() + 1; }

    /// Out-of-sample path k (1-based), starting from the in-sample terminal state.
    PricePath oos_path(int k) const {
        const std::int64_t start = in_path_.last_day();
        const RngSeed seed = derive_seed(cfg_.seed, static_cast<std::uint64_t>(k));
        if (cfg_.heston) {
            HestonParams p = cfg_.heston_params;
            p.s0 = in_path_.spot.back();
            p.y0 = std::max(in_path_.variance->back(), 1e-10);
            return simulate_heston(p, cfg_.oos_days, cfg_.steps_per_day, cfg_.scheme, seed, start);
        }
        GbmParams p = cfg_.gbm;
        p.s0 = in_path_.spot.back();
        return simulate_gbm(p, cfg_.oos_days, seed, start);
    }

    /// Contracts live on an out-of-sample path: the in-sample book plus new listings.
    std::vector<OptionContract> oos_contracts(const PricePath& path) const {
        auto uni = generate_option_universe(path, calendar_, state_, {}, oos_first_day());
        std::vector<OptionContract> out;
        for (const auto& c : in_contracts_)
            if (c.last_day > oos_first_day()) out.push_back(c);
        for (auto& c : uni.contracts) out.push_back(std::move(c));
        return out;
    }

    /// Cleaned and normalized samples of one path for one horizon.
    std::pair<SampleTable, CleaningReport> samples(const PricePath& path, const std::vector<OptionContract>& contracts,
                                                   int horizon_days, std::int64_t from_day) const {
        BuildOptions opt;
        opt.horizon_days = horizon_days;
        opt.r_onr = cfg_.r_onr;
        opt.from_day = from_day;
        opt.prefilter = &cfg_.cleaning;
        auto res = build_samples(path, contracts, cfg_.pricing(), calendar_, opt);
        normalize_table(res.table);
        return {std::move(res.table), res.report};
    }

    std::pair<SampleTable, CleaningReport> in_sample_samples(int horizon_days) const {
        return samples(in_path_, in_contracts_, horizon_days, in_path_.first_day());
    }

    std::pair<SampleTable, CleaningReport> oos_samples(int k, int horizon_days) const {
        const PricePath p = oos_path(k);
        return samples(p, oos_contracts(p), horizon_days, oos_first_day());
    }

private:
    ExperimentConfig cfg_;
    TradingCalendar calendar_;
    PricePath in_path_;
    std::vector<OptionContract> in_contracts_;
    ListingState state_;
};

// ---------------------------------------------------------------------------
// Fitting and evaluation

struct AnnRun {
    int window_id = 0;
    int horizon_days = 1;
    FeatureSet feature_set = FeatureSet::delta_vega_tau;
    RngSeed seed = 0;
    double alpha = 0.0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool selected = false;
};

struct NamedNet {
    int window_id = 0;
    std::string name;
    TrainedNet net;
};

struct HorizonResult {
    int horizon_days = 1;
    std::vector<HedgeModel> models;  ///< every window's fits, tagged with window_id
    std::vector<NamedNet> nets;
    std::vector<AnnRun> ann_runs;
    std::vector<PairwiseCI> cis;
    std::vector<std::pair<int, std::vector<LeverageRow>>> leverage;
    std::vector<std::tuple<std::string, int, BucketAxis, DecileRow>> buckets;
};

inline std::string ann_name(FeatureSet f) { return std::string("ann_") + to_string(f); }

/// Fits the roster (regressions on the whole in-sample table, HedgeNets on
/// the training part with validation early stopping) and evaluates every
/// model on test tables. Diagnostics are pooled over all evaluated tables.
class Evaluation {
public:
    using Log = std::function<void(const std::string&)>;

    Evaluation(const ExperimentConfig& cfg, int horizon_days, Log log = {})
        : cfg_(cfg), horizon_(horizon_days), log_(std::move(log)) {
        result_.horizon_days = horizon_days;
    }

    /// Simulation layout: the first train_days day values train, the rest validate.
    void fit(const SampleTable& in_sample) {
        if (in_sample.empty()) throw InputError("in-sample table is empty");
        const auto split = split_days(distinct_days(in_sample),
                                      SimulationMode{cfg_.train_days, cfg_.in_sample_days - cfg_.train_days, 0});
        fit_split(in_sample, select_days(in_sample, split.front().train),
                  select_days(in_sample, split.front().validation), 0);
    }

    void fit_split(const SampleTable& in_sample, const SampleTable& train_set, const SampleTable& val,
                   int window_id) {
        models_.clear();
        nets_.clear();
        window_id_ = window_id;
        for (const auto& name : cfg_.roster) {
            HedgeModel m = make_model(name);
            m.f_call = cfg_.fixed_call;
            m.f_put = cfg_.fixed_put;
            m.intercept = cfg_.intercept && m.kind == ModelKind::linear;
            m.window_id = window_id;
            if (m.kind == ModelKind::heston_adjusted || m.kind == ModelKind::delta_vega_neutral) {
                if (!cfg_.heston) throw ConfigError("model '" + name + "' requires simulated Heston data");
                m.heston = cfg_.heston_params;
            }
            if (m.needs_fit()) say("fitting " + name);
            try {
                models_.push_back(deltabench::fit(std::move(m), in_sample));
            } catch (const FitError& e) {
                throw FitError(name + ": " + e.what());
            } catch (const InputError& e) {
                throw InputError(name + ": " + e.what());
            } catch (const NumericalError& e) {
                throw NumericalError(name + ": " + e.what());
            }
        }
        for (FeatureSet f : cfg_.anns) {
            const double alpha = cfg_.ann_alpha.value_or(default_alpha(cfg_.heston, horizon_, f));
            std::optional<TrainedNet> best;
            std::size_t best_run = 0;
            for (int s = 0; s < cfg_.ann_seeds; ++s) {
                TrainConfig tc = cfg_.train;
                tc.l2_alpha = alpha;
                tc.seed = derive_seed(cfg_.seed, 1000u + static_cast<std::uint64_t>(s));
                say("training " + ann_name(f) + " run " + std::to_string(s + 1) + "/" +
                    std::to_string(cfg_.ann_seeds));
                TrainedNet net;
                try {
                    net = deltabench::train(train_set, val, NetConfig{f, {30, 30}}, tc);
                } catch (const FitError& e) {
                    throw FitError(ann_name(f) + ": " + e.what());
                } catch (const NumericalError& e) {
                    throw NumericalError(ann_name(f) + ": " + e.what());
                }
                const double vl = best_val(net);
                result_.ann_runs.push_back({window_id, horizon_, f, tc.seed, alpha, net.best_epoch, vl, false});
                if (!best || vl < best_val(*best)) {
                    best = std::move(net);
                    best_run = result_.ann_runs.size() - 1;
                }
            }
            result_.ann_runs[best_run].selected = true;
            nets_.emplace_back(ann_name(f), std::move(*best));
        }
        threshold_ = cfg_.bucket_moneyness ? std::optional<double>(moneyness_threshold(train_set)) : std::nullopt;
        if (cfg_.diagnostics) result_.leverage.emplace_back(window_id, leverage_report(train_set));
        for (const auto& m : models_) result_.models.push_back(m);
        for (const auto& [n, net] : nets_) result_.nets.push_back({window_id, n, net});
    }

    std::vector<std::string> model_names() const {
        std::vector<std::string> out;
        for (const auto& m : models_) out.push_back(m.name);
        for (const auto& [n, _] : nets_) out.push_back(n);
        return out;
    }

    /// Hedging errors of the current fits on `test`, in model_names() order.
    std::vector<std::vector<double>> errors(const SampleTable& test) const {
        std::vector<std::vector<double>> out;
        for (const auto& m : models_) {
            try {
                out.push_back(hedging_errors(test, m));
            } catch (const Error& e) {
                throw EvaluationError(m.name + ": " + e.what());
            }
        }
        for (const auto& [_, net] : nets_) out.push_back(hedging_errors(test, net));
        return out;
    }

    /// Evaluates one test table. `set_index` keeps days of different
    /// out-of-sample sets apart in the pooled diagnostics.
    void evaluate(const SampleTable& test, const std::string& window, int set_index, EvalReport& report) {
        if (test.empty()) throw EvaluationError("test table for window " + window + " is empty");
        const auto names = model_names();
        const auto errs = errors(test);
        std::vector<std::size_t> near, otm;
        if (threshold_)
            for (std::size_t i = 0; i < test.size(); ++i)
                (std::abs(test[i].moneyness - 1.0) <= *threshold_ ? near : otm).push_back(i);
        for (std::size_t j = 0; j < names.size(); ++j) {
            report.add(window, names[j], horizon_, mshe(test, errs[j]));
            for (const auto& [label, idx] : {std::pair{"near", &near}, std::pair{"otm", &otm}}) {
                if (idx->empty()) continue;
                SampleTable sub;
                std::vector<double> e;
                for (auto i : *idx) {
                    sub.push_back(test[i]);
                    e.push_back(errs[j][i]);
                }
                report.add(window, names[j], horizon_, mshe(sub, e), label);
            }
        }
        if (!cfg_.diagnostics) return;
        if (pooled_names_.empty()) {
            pooled_names_ = names;
            pooled_errors_.resize(names.size());
        } else if (pooled_names_ != names) {
            throw StateError("model roster changed between evaluations");
        }
        for (const auto& s : test) {
            pooled_days_.push_back(static_cast<std::int64_t>(set_index) * 1'000'000 + s.day);
            pooled_tau_.push_back(s.tau);
            pooled_vega_.push_back(s.vega_bs);
            pooled_scale_.push_back(s.S0 / 100.0 / s.C0);
        }
        for (std::size_t j = 0; j < names.size(); ++j)
            pooled_errors_[j].insert(pooled_errors_[j].end(), errs[j].begin(), errs[j].end());
    }

    /// Pairwise intervals against BS Delta and bucket diagnostics over every
    /// evaluated table.
    HorizonResult finish() {
        if (cfg_.diagnostics && !pooled_days_.empty()) {
            const auto& names = pooled_names_;
            const auto b = std::find(names.begin(), names.end(), "bs_delta");
            const std::set<std::int64_t> distinct(pooled_days_.begin(), pooled_days_.end());
            if (b != names.end() && distinct.size() >= 2) {
                const auto bi = static_cast<std::size_t>(b - names.begin());
                for (std::size_t j = 0; j < names.size(); ++j)
                    if (j != bi)
                        result_.cis.push_back(
                            pairwise_ci(pooled_days_, pooled_errors_[j], pooled_errors_[bi], names[j], names[bi]));
            }
            for (std::size_t j = 0; j < names.size(); ++j) {
                std::vector<double> rel(pooled_errors_[j].size());
                for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = pooled_errors_[j][i] * pooled_scale_[i];
                for (BucketAxis axis : {BucketAxis::tau, BucketAxis::vega})
                    for (const auto& row : bucket_diagnostics(axis == BucketAxis::tau ? pooled_tau_ : pooled_vega_, rel))
                        result_.buckets.emplace_back(names[j], horizon_, axis, row);
            }
        }
        HorizonResult out = std::move(result_);
        result_ = HorizonResult{};
        result_.horizon_days = horizon_;
        pooled_names_.clear();
        pooled_days_.clear();
        pooled_tau_.clear();
        pooled_vega_.clear();
        pooled_scale_.clear();
        pooled_errors_.clear();
        return out;
    }

    const std::vector<HedgeModel>& models() const { return models_; }
    const std::vector<std::pair<std::string, TrainedNet>>& nets() const { return nets_; }

private:
    static double best_val(const TrainedNet& n) { return n.val_loss[static_cast<std::size_t>(n.best_epoch - 1)]; }

    void say(const std::string& msg) const {
        if (log_) log_("[" + horizon_label(horizon_) + " w" + std::to_string(window_id_) + "] " + msg);
    }

    const ExperimentConfig& cfg_;
    int horizon_;
    Log log_;
    int window_id_ = 0;
    std::vector<HedgeModel> models_;
    std::vector<std::pair<std::string, TrainedNet>> nets_;
    std::optional<double> threshold_;
    HorizonResult result_;
    std::vector<std::string> pooled_names_;
    std::vector<std::int64_t> pooled_days_;
    std::vector<double> pooled_tau_, pooled_vega_, pooled_scale_;
    std::vector<std::vector<double>> pooled_errors_;
};

/// Coefficients with +-2 standard-error bands, one row per model, class,
/// coefficient and window.
inline void write_coefficients_csv(std::ostream& os, const std::vector<std::pair<int, HedgeModel>>& models) {
    csv::Writer w(os);
    w.header({"window", "model", "horizon_days", "class", "coefficient", "estimate", "standard_error", "lower_2se",
              "upper_2se"});
    for (const auto& [horizon_days, m] : models) {
        for (int cp : {0, 1}) {
            const auto& f = m.fits[static_cast<std::size_t>(cp)];
            if (!f) continue;
            for (std::size_t k = 0; k < f->coefficients.size(); ++k) {
                const double est = f->coefficients[k], se = f->standard_errors[k];
                w.field(m.window_id).field(m.name).field(horizon_days).field(std::string(cp ? "puts" : "calls"));
                w.field(f->names[k]).field(est).field(se).field(est - 2.0 * se).field(est + 2.0 * se);
                w.end_row();
            }
        }
    }
}

inline void write_ann_runs_csv(std::ostream& os, const std::vector<AnnRun>& runs) {
    csv::Writer w(os);
    w.header({"window", "horizon_days", "feature_set", "seed", "alpha", "best_epoch", "best_val_loss", "selected"});
    for (const auto& r : runs) {
        w.field(r.window_id).field(r.horizon_days).field(std::string(to_string(r.feature_set)));
        w.field(static_cast<std::int64_t>(r.seed)).field(r.alpha).field(r.best_epoch).field(r.best_val_loss);
        w.field(r.selected ? 1 : 0);
        w.end_row();
    }
}

inline void write_cleaning_csv(std::ostream& os, const std::vector<std::tuple<std::string, int, CleaningReport>>& reps) {
    csv::Writer w(os);
    w.header({"table", "horizon_days", "item", "count"});
    for (const auto& [table, h, r] : reps) {
        auto row = [&](const std::string& item, std::int64_t n) {
            w.field(table).field(h).field(item).field(n);
            w.end_row();
        };
        row("input", r.input);
        for (CleanRule rule : kAllCleanRules) {
            auto it = r.removed.find(rule);
            row(std::string("removed_") + to_string(rule), it == r.removed.end() ? 0 : it->second);
        }
        row("retained_calls", r.retained_calls);
        row("retained_puts", r.retained_puts);
    }
}

} // namespace deltabench
