#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "deltabench/experiment.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace deltabench;

namespace {

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

template <typename F>
void write_file(const fs::path& path, F&& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write '" + path.string() + "'");
    body(os);
    os.close();
    if (!os) throw InputError("write failed for '" + path.string() + "'");
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    return in;
}

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

SampleTable read_samples(const fs::path& path) {
    auto in = open_in(path);
    return read_samples_csv(in, path.string());
}

std::string set_label(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "oos_%02d", k);
    return buf;
}

std::string flag_name(const std::string& key) {
    std::string f = key;
    for (auto& c : f)
        if (c == '_') c = '-';
    return "--" + f;
}

/// Config sources shared by every subcommand: --config, --set key=value,
/// --horizon and one flag per configuration key.
struct ConfigOptions {
    std::string config_path;
    std::vector<std::string> sets;
    std::string horizon;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "configuration file of key = value lines");
        app->add_option("--set", sets, "override a configuration key (key=value), repeatable");
        app->add_option("--horizon", horizon, "restrict to one hedging period (1h, 1d or 2d)");
        for (const auto& k : config_keys()) {
            const std::string help = k.help + " [" + k.default_value + "]";
            if (k.default_value == "true" || k.default_value == "false")
                options[k.name] = app->add_flag(flag_name(k.name) + "{true}", values[k.name], help);
            else
                options[k.name] = app->add_option(flag_name(k.name), values[k.name], help);
        }
    }

    void apply(ConfigMap& cm) const {
        if (!config_path.empty()) cm.merge_file(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            cm.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, opt] : options)
            if (opt->count() > 0) cm.set(k, values.at(k));
        if (!horizon.empty()) {
            const TickHorizon h = parse_horizon(horizon);
            cm.set("tick_horizon", horizon);
            if (h.unit == TickHorizon::Unit::business_days) cm.set("horizons", horizon);
        }
    }
};

void write_config(const fs::path& path, const ConfigMap& cm) {
    write_file(path, [&](std::ostream& os) { os << cm.canonical(); });
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const ConfigMap& cm, const fs::path& out) {
    const ExperimentConfig cfg = resolve_config(cm);
    log_line("simulating " + std::string(cfg.heston ? "Heston" : "Black-Scholes") + " in-sample path");
    const SimulationStudy study(cfg);
    std::vector<std::tuple<std::string, int, CleaningReport>> cleaning;
    json counts = json::object();

    write_file(out / "paths" / "in_sample.csv", [&](std::ostream& os) { write_path_csv(os, study.in_sample_path()); });
    write_file(out / "samples" / "contracts_in_sample.csv",
               [&](std::ostream& os) { write_contracts_csv(os, study.in_sample_contracts()); });
    for (int h : cfg.horizons) {
        auto [table, rep] = study.in_sample_samples(h);
        const std::string name = "in_sample_" + horizon_label(h);
        write_file(out / "samples" / (name + ".csv"), [&](std::ostream& os) { write_samples_csv(os, table); });
        cleaning.emplace_back("in_sample", h, rep);
        counts[name] = {{"rows", table.size()}, {"calls", rep.retained_calls}, {"puts", rep.retained_puts}};
        log_line("  " + name + ": " + std::to_string(table.size()) + " samples (" + std::to_string(rep.retained_calls) +
                 " calls, " + std::to_string(rep.retained_puts) + " puts)");
    }
    for (int k = 1; k <= cfg.oos_sets; ++k) {
        const std::string label = set_label(k);
        const PricePath path = study.oos_path(k);
        const auto contracts = study.oos_contracts(path);
        write_file(out / "paths" / (label + ".csv"), [&](std::ostream& os) { write_path_csv(os, path); });
        write_file(out / "samples" / ("contracts_" + label + ".csv"),
                   [&](std::ostream& os) { write_contracts_csv(os, contracts); });
        for (int h : cfg.horizons) {
            auto [table, rep] = study.samples(path, contracts, h, study.oos_first_day());
            const std::string name = label + "_" + horizon_label(h);
            write_file(out / "samples" / (name + ".csv"), [&](std::ostream& os) { write_samples_csv(os, table); });
            cleaning.emplace_back(label, h, rep);
            counts[name] = {{"rows", table.size()}, {"calls", rep.retained_calls}, {"puts", rep.retained_puts}};
        }
        log_line("  " + label + " done");
    }
    write_file(out / "samples" / "cleaning.csv", [&](std::ostream& os) { write_cleaning_csv(os, cleaning); });
    write_config(out / "config.txt", cm);

    json m;
    m["tool"] = "deltabench";
    m["data_kind"] = "simulation";
    m["model"] = cfg.heston ? "heston" : "bs";
    m["config_hash"] = cm.hash();
    m["seed"] = cfg.seed;
    m["horizons"] = cfg.horizons;
    m["oos_sets"] = cfg.oos_sets;
    m["sample_counts"] = counts;
    write_file(out / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
    log_line("wrote " + out.string());
    return 0;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestInputs {
    std::string samples, trades, underlying, contracts;
};

int cmd_ingest(const ConfigMap& cm, const IngestInputs& in, const fs::path& out) {
    const ExperimentConfig cfg = resolve_config(cm);
    SampleTable table;
    json m;
    if (!in.samples.empty()) {
        if (!in.trades.empty() || !in.underlying.empty() || !in.contracts.empty())
            throw ConfigError("ingest: use either --samples or --trades/--underlying/--contracts");
        table = read_samples(in.samples);
        m["source"] = "samples";
    } else {
        if (in.trades.empty() || in.underlying.empty() || in.contracts.empty())
            throw ConfigError("ingest: --trades, --underlying and --contracts are required without --samples");
        auto ts = open_in(in.trades);
        auto us = open_in(in.underlying);
        auto cs = open_in(in.contracts);
        const auto trades = read_trades_csv(ts, in.trades);
        const auto ticks = read_underlying_csv(us, in.underlying);
        const auto contracts = read_contracts_csv(cs, nullptr, in.contracts);
        MatchOptions mo;
        mo.horizon = cfg.tick_horizon;
        mo.tolerance_minutes = cfg.tolerance_min;
        mo.r_onr = cfg.r_onr;
        auto [matched, rep] = match_ticks(trades, ticks, contracts, mo);
        table = std::move(matched);
        m["source"] = "ticks";
        m["match"] = {{"trades_in", rep.trades_in},       {"matched", rep.matched},
                      {"no_next_trade", rep.no_next_trade}, {"no_underlying", rep.no_underlying},
                      {"unknown_contract", rep.unknown_contract}, {"expired", rep.expired}};
        log_line("matched " + std::to_string(rep.matched) + " of " + std::to_string(rep.trades_in) + " trades");
    }
    auto [cleaned, rep] = clean(table, cfg.cleaning);
    normalize_table(cleaned);
    log_line("retained " + std::to_string(cleaned.size()) + " of " + std::to_string(table.size()) + " samples");
    write_file(out / "samples" / "samples.csv", [&](std::ostream& os) { write_samples_csv(os, cleaned); });
    const int hdays = cfg.tick_horizon.unit == TickHorizon::Unit::business_days ? cfg.tick_horizon.count : 0;
    write_file(out / "samples" / "cleaning.csv",
               [&](std::ostream& os) { write_cleaning_csv(os, {{"samples", hdays, rep}}); });
    write_config(out / "config.txt", cm);
    m["tool"] = "deltabench";
    m["data_kind"] = "windowed";
    m["config_hash"] = cm.hash();
    m["horizon"] = cm.get("tick_horizon");
    m["horizon_days"] = hdays;
    m["rows"] = cleaned.size();
    write_file(out / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
    log_line("wrote " + out.string());
    return 0;
}

// ---------------------------------------------------------------------------
// run

SampleTable load_clean(const fs::path& path, const CleaningRules& rules) {
    return clean(read_samples(path), rules).first;
}

void collect(const HorizonResult& r, std::vector<std::pair<int, HedgeModel>>& models, std::vector<std::pair<int, NamedNet>>& nets,
             std::vector<AnnRun>& runs, std::vector<std::pair<int, PairwiseCI>>& cis,
             std::vector<LeverageEntry>& lev, std::vector<std::tuple<std::string, int, BucketAxis, DecileRow>>& buckets) {
    for (const auto& m : r.models) models.emplace_back(r.horizon_days, m);
    for (const auto& n : r.nets) nets.emplace_back(r.horizon_days, n);
    for (const auto& a : r.ann_runs) runs.push_back(a);
    for (const auto& c : r.cis) cis.emplace_back(r.horizon_days, c);
    for (const auto& [w, rows] : r.leverage)
        for (const auto& row : rows) lev.push_back({r.horizon_days, w, row});
    for (const auto& b : r.buckets) buckets.push_back(b);
}

int cmd_run(const ConfigMap& cm, const fs::path& data, const fs::path& out) {
    const json dm = read_json(data / "manifest.json");
    const ExperimentConfig cfg = resolve_config(cm);
    const std::string kind = dm.value("data_kind", "");
    EvalReport report;
    std::vector<std::pair<int, HedgeModel>> models;
    std::vector<std::pair<int, NamedNet>> nets;
    std::vector<AnnRun> runs;
    std::vector<std::pair<int, PairwiseCI>> cis;
    std::vector<LeverageEntry> lev;
    std::vector<std::tuple<std::string, int, BucketAxis, DecileRow>> buckets;
    std::vector<int> horizons;

    if (kind == "simulation") {
        const auto available = dm.at("horizons").get<std::vector<int>>();
        const int sets = std::min(dm.at("oos_sets").get<int>(), cfg.oos_sets);
        for (int h : cfg.horizons) {
            if (std::find(available.begin(), available.end(), h) == available.end())
                throw InputError("no simulated samples for horizon " + horizon_label(h) + " in " + data.string());
            horizons.push_back(h);
            Evaluation ev(cfg, h, log_line);
            ev.fit(load_clean(data / "samples" / ("in_sample_" + horizon_label(h) + ".csv"), cfg.cleaning));
            for (int k = 1; k <= sets; ++k) {
                const auto label = set_label(k);
                ev.evaluate(load_clean(data / "samples" / (label + "_" + horizon_label(h) + ".csv"), cfg.cleaning),
                            label, k, report);
            }
            log_line("[" + horizon_label(h) + "] evaluated " + std::to_string(sets) + " out-of-sample sets");
            collect(ev.finish(), models, nets, runs, cis, lev, buckets);
        }
    } else if (kind == "windowed") {
        report.pooled = true;
        const int h = dm.at("horizon_days").get<int>();
        horizons.push_back(h);
        const SampleTable table = load_clean(data / "samples" / "samples.csv", cfg.cleaning);
        const auto windows = split_windows(table, cfg.window_mode);
        write_file(out / "reports" / "windows.csv", [&](std::ostream& os) { write_windows_csv(os, windows); });
        Evaluation ev(cfg, h, log_line);
        for (const auto& w : windows) {
            const SampleTable train = select_days(table, w.train);
            const SampleTable val = select_days(table, w.validation);
            SampleTable in_sample = train;
            in_sample.insert(in_sample.end(), val.begin(), val.end());
            ev.fit_split(in_sample, train, val, w.window_id);
            ev.evaluate(select_days(table, w.test), std::to_string(w.window_id), w.window_id, report);
        }
        log_line("evaluated " + std::to_string(windows.size()) + " windows");
        collect(ev.finish(), models, nets, runs, cis, lev, buckets);
    } else {
        throw InputError(data.string() + "/manifest.json: unknown data kind '" + kind + "'");
    }

    const fs::path rep = out / "reports";
    write_file(rep / "mshe.csv", [&](std::ostream& os) { report.write_csv(os); });
    write_file(rep / "summary.csv", [&](std::ostream& os) { report.write_summary_csv(os); });
    if (cfg.diagnostics) {
        write_file(rep / "pairwise_ci.csv", [&](std::ostream& os) { write_ci_csv(os, cis); });
        write_file(rep / "leverage.csv", [&](std::ostream& os) { write_leverage_csv(os, lev); });
        write_file(rep / "buckets.csv", [&](std::ostream& os) { write_buckets_csv(os, buckets); });
    }
    if (!runs.empty()) write_file(rep / "ann_runs.csv", [&](std::ostream& os) { write_ann_runs_csv(os, runs); });
    for (const auto& [h, m] : models) {
        write_file(out / "models" / horizon_label(h) / (std::to_string(m.window_id) + "_" + m.name + ".json"),
                   [&](std::ostream& os) { os << model_to_json(m).dump(2) << '\n'; });
    }
    for (const auto& [h, n] : nets) {
        write_file(out / "models" / horizon_label(h) / (std::to_string(n.window_id) + "_" + n.name + ".json"),
                   [&](std::ostream& os) { os << net_to_json(n.net).dump(2) << '\n'; });
    }
    write_config(out / "run_config.txt", cm);

    json m = fs::exists(out / "manifest.json") ? read_json(out / "manifest.json") : json::object();
    m["tool"] = "deltabench";
    m["run"] = {{"config_hash", cm.hash()}, {"seed", cfg.seed}, {"horizons", horizons},
                {"pooled", report.pooled},  {"data", data.string()}};
    write_file(out / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
    return 0;
}

// ---------------------------------------------------------------------------
// report

std::string cell(double v, bool pct) {
    if (!std::isfinite(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, pct ? "%+.2f%%" : "%.4f", v);
    return buf;
}

int cmd_report(const fs::path& run) {
    if (!fs::exists(run / "reports" / "mshe.csv"))
        throw InputError("no run results in '" + run.string() + "' (reports/mshe.csv missing)");
    const json m = read_json(run / "manifest.json");
    if (!m.contains("run")) throw InputError(run.string() + "/manifest.json has no run entry");
    auto in = open_in(run / "reports" / "mshe.csv");
    const EvalReport report = read_eval_report(in, m["run"].value("pooled", false), (run / "reports/mshe.csv").string());
    const fs::path dir = run / "report";

    // Table-5-shaped summary, regenerated from the per-window rows.
    write_file(dir / "summary.csv", [&](std::ostream& os) { report.write_summary_csv(os); });
    std::ostringstream txt;
    const auto avg = report.averaged();
    auto lookup = [&](const std::string& sub, const std::string& model, int h, CpClass c) {
        for (const auto& r : avg)
            if (r.subset == sub && r.model == model && r.horizon_days == h && r.cp == c) return r.mshe;
        return kNaN;
    };
    std::vector<std::tuple<std::string, int>> groups;
    std::vector<std::string> model_order;
    for (const auto& r : avg) {
        if (std::find(groups.begin(), groups.end(), std::tuple{r.subset, r.horizon_days}) == groups.end())
            groups.emplace_back(r.subset, r.horizon_days);
        if (std::find(model_order.begin(), model_order.end(), r.model) == model_order.end())
            model_order.push_back(r.model);
    }
    txt << (report.pooled ? "MSHE pooled over windows" : "MSHE averaged over out-of-sample sets")
        << "; models other than zero and bs_delta as % change vs bs_delta\n";
    for (const auto& [sub, h] : groups) {
        txt << "\n" << (h > 0 ? horizon_label(h) : std::string("intraday")) << " hedging period, subset " << sub << "\n";
        char line[160];
        std::snprintf(line, sizeof line, "%-28s %12s %12s %12s\n", "model", "calls", "puts", "both");
        txt << line;
        for (const auto& model : model_order) {
            if (!std::isfinite(lookup(sub, model, h, CpClass::both))) continue;
            const bool pct = model != "zero" && model != "bs_delta" &&
                             std::isfinite(lookup(sub, "bs_delta", h, CpClass::both));
            std::string cells[3];
            int i = 0;
            for (CpClass c : {CpClass::calls, CpClass::puts, CpClass::both}) {
                const double v = lookup(sub, model, h, c);
                cells[i++] = cell(pct ? relative_improvement(v, lookup(sub, "bs_delta", h, c)) : v, pct);
            }
            std::snprintf(line, sizeof line, "%-28s %12s %12s %12s\n", model.c_str(), cells[0].c_str(),
                          cells[1].c_str(), cells[2].c_str());
            txt << line;
        }
    }
    write_file(dir / "summary.txt", [&](std::ostream& os) { os << txt.str(); });
    std::cout << txt.str();

    // Per-window series with the change against BS Delta in the same window.
    std::map<std::tuple<std::string, std::string, int, CpClass>, double> base, zero;
    for (const auto& r : report.rows) {
        if (r.model == "bs_delta") base[{r.window, r.subset, r.horizon_days, r.cp}] = r.mshe;
        if (r.model == "zero") zero[{r.window, r.subset, r.horizon_days, r.cp}] = r.mshe;
    }
    write_file(dir / "window_mshe.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        w.header({"window", "subset", "model", "horizon_days", "class", "mshe", "n", "vs_bs_delta_pct"});
        for (const auto& r : report.rows) {
            auto it = base.find({r.window, r.subset, r.horizon_days, r.cp});
            const double b = it == base.end() ? kNaN : it->second;
            w.field(r.window).field(r.subset).field(r.model).field(r.horizon_days);
            w.field(std::string(to_string(r.cp))).field(r.mshe).field(r.n);
            w.field(b > 0.0 ? relative_improvement(r.mshe, b) : kNaN);
            w.end_row();
        }
    });
    if (!zero.empty()) {
        write_file(dir / "ratio_to_zero.csv", [&](std::ostream& os) {
            csv::Writer w(os);
            w.header({"window", "subset", "model", "horizon_days", "class", "ratio_to_zero"});
            for (const auto& r : report.rows) {
                auto it = zero.find({r.window, r.subset, r.horizon_days, r.cp});
                if (it == zero.end() || !(it->second > 0.0)) continue;
                w.field(r.window).field(r.subset).field(r.model).field(r.horizon_days);
                w.field(std::string(to_string(r.cp))).field(r.mshe / it->second);
                w.end_row();
            }
        });
    }

    // Coefficient series with +-2 SE bands from the persisted fits.
    std::vector<std::pair<int, HedgeModel>> models;
    for (int h : m["run"].value("horizons", std::vector<int>{})) {
        const fs::path mdir = run / "models" / horizon_label(h);
        if (!fs::exists(mdir)) continue;
        for (const auto& e : fs::directory_iterator(mdir)) {
            if (e.path().extension() != ".json") continue;
            const json j = read_json(e.path());
            if (j.contains("variant")) models.emplace_back(h, model_from_json(j));
        }
    }
    std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first, a.second.name, a.second.window_id) < std::tie(b.first, b.second.name, b.second.window_id);
    });
    write_file(dir / "coefficients.csv", [&](std::ostream& os) { write_coefficients_csv(os, models); });

    for (const char* name : {"leverage.csv", "buckets.csv", "pairwise_ci.csv"})
        if (fs::exists(run / "reports" / name))
            fs::copy_file(run / "reports" / name, dir / name, fs::copy_options::overwrite_existing);
    log_line("wrote " + dir.string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deltabench: hedging benchmark for option data"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "simulate paths, list contracts and build sample tables");
    ConfigOptions sim_cfg;
    std::string sim_out;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim_cfg.attach(sim);

    auto* ing = app.add_subcommand("ingest", "turn tick data or a prepared sample file into a cleaned sample table");
    ConfigOptions ing_cfg;
    std::string ing_out;
    IngestInputs inputs;
    ing->add_option("--out", ing_out, "output directory")->required();
    ing->add_option("--samples", inputs.samples, "prepared sample CSV");
    ing->add_option("--trades", inputs.trades, "option trades CSV (timestamp, contract, price, volume)");
    ing->add_option("--underlying", inputs.underlying, "underlying ticks CSV (timestamp, price, volume)");
    ing->add_option("--contracts", inputs.contracts, "contract metadata CSV (id, kind, strike, expiry)");
    ing_cfg.attach(ing);

    auto* run = app.add_subcommand("run", "fit and evaluate the model roster");
    ConfigOptions run_cfg;
    std::string run_data, run_out;
    run->add_option("--data", run_data, "directory written by simulate or ingest")->required();
    run->add_option("--out", run_out, "run directory (defaults to the data directory)");
    run_cfg.attach(run);

    auto* rep = app.add_subcommand("report", "summaries and plot data from a finished run");
    std::string rep_run;
    rep->add_option("--run", rep_run, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            ConfigMap cm;
            sim_cfg.apply(cm);
            return cmd_simulate(cm, sim_out);
        }
        if (ing->parsed()) {
            ConfigMap cm;
            ing_cfg.apply(cm);
            return cmd_ingest(cm, inputs, ing_out);
        }
        if (run->parsed()) {
            ConfigMap cm;
            const fs::path data = run_data;
            if (!fs::exists(data / "manifest.json"))
                throw InputError("'" + run_data + "' has no manifest.json; run simulate or ingest first");
            cm.merge_file((data / "config.txt").string());
            run_cfg.apply(cm);
            return cmd_run(cm, data, run_out.empty() ? data : fs::path(run_out));
        }
        if (rep->parsed()) return cmd_report(rep_run);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return e.exit_code();
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }
    return 0;
}
