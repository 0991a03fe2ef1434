#include "fundalpha/cli.hpp"

#include "fundalpha/boot.hpp"
#include "fundalpha/csv.hpp"
#include "fundalpha/error.hpp"
#include "fundalpha/panel.hpp"
#include "fundalpha/regress.hpp"
#include "fundalpha/report.hpp"
#include "fundalpha/screen.hpp"
#include "fundalpha/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fundalpha {

namespace {

namespace fs = std::filesystem;

// Problems with how the tool was invoked; exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw UsageError(std::string(what) + " file not found: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(std::string("cannot open ") + what + " file: " + path);
    return in;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

double parse_threshold(const std::string& text) {
    const std::string s = csv::lower(text);
    if (s == "disabled" || s == "inf" || s == "off") return kDisabled;
    return csv::parse_decimal(text, "threshold");
}

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands
// ---------------------------------------------------------------------------

struct InputOptions {
    std::string factors;
    std::string funds;
    bool percent = false;
    std::string start;
    std::string end;
    unsigned threads = 1;

    void add(CLI::App& app) {
        app.add_option("--factors", factors, "Factor CSV (date,MKT_RF,SMB,HML[,MOM][,RMW][,CMA],RF)")
            ->required();
        app.add_option("--funds", funds, "Fund CSV (fund_id,date,net_return,aum)")->required();
        app.add_flag("--factors-percent", percent, "Factor file values are in percent");
        app.add_option("--start", start, "First month of the study period (YYYYMM)");
        app.add_option("--end", end, "Last month of the study period (YYYYMM)");
        app.add_option("--threads", threads, "Worker threads, 0 = all cores");
    }
};

struct ScreenOptions {
    ScreenConfig cfg;
    std::string rf_tstat_max = "8";
    std::string index_tstat_max = "8";
    std::string leverage = "5";
    std::string cutoffs = "5,250,1000";
    std::string grouping = "not-index-and-equity";

    void add(CLI::App& app) {
        app.add_option("--incubation-threshold", cfg.incubation_threshold_aum,
                       "AuM (millions) a fund must reach once before its returns count");
        app.add_option("--rf-tstat-max", rf_tstat_max, "Money-market screen: max |t(RF)| or 'disabled'");
        app.add_option("--index-beta-band", cfg.index_beta_band, "Index screen: |beta|-1 band");
        app.add_option("--index-tstat-max", index_tstat_max, "Index screen: |T_beta| bound or 'disabled'");
        app.add_option("--leverage-beta-max-excess", leverage,
                       "Leverage screen: max |beta|-1 or 'disabled'");
        app.add_option("--market-tstat-min", cfg.market_tstat_min,
                       "Minimum |T_beta| on the market (0 disables)");
        app.add_option("--min-history", cfg.min_history_months, "Minimum number of observations");
        app.add_option("--size-cutoffs", cutoffs, "Comma-separated AuM cutoffs in millions");
        app.add_option("--index-grouping", grouping,
                       "Clause grouping: not-index-and-equity | index-or-rest");
    }

    ScreenConfig resolve() {
        ScreenConfig c = cfg;
        c.rf_tstat_max = parse_threshold(rf_tstat_max);
        c.index_tstat_max = parse_threshold(index_tstat_max);
        c.leverage_beta_max_excess = parse_threshold(leverage);
        c.size_cutoffs.clear();
        for (const auto& cell : csv::split(cutoffs)) {
            c.size_cutoffs.push_back(csv::parse_decimal(cell, "--size-cutoffs"));
        }
        if (grouping == "not-index-and-equity") {
            c.grouping = IndexRuleGrouping::NotIndexAndEquity;
        } else if (grouping == "index-or-rest") {
            c.grouping = IndexRuleGrouping::IndexOrRest;
        } else {
            throw ConfigError("unknown --index-grouping '" + grouping + "'");
        }
        c.validate();
        return c;
    }
};

struct ModelOptions {
    std::string model = "ff3";
    std::string group = "all";

    void add(CLI::App& app) {
        app.add_option("--model", model, "capm | ff3 | carhart4 | ff5");
        app.add_option("--group", group, "Size group label (e.g. 5m, 250m, 1b) or 'all'");
    }
};

struct SimOptions {
    std::size_t sims = 10000;
    std::uint64_t seed = 0;
    std::size_t min_resampled_obs = 12;
    std::size_t pooled_cap = 0;

    void add(CLI::App& app) {
        app.add_option("--sims", sims, "Number of bootstrap runs");
        app.add_option("--seed", seed, "Base seed");
        app.add_option("--min-resampled-obs", min_resampled_obs,
                       "Minimum usable months for a fund within a run");
        app.add_option("--pooled-cap", pooled_cap,
                       "Keep at most this many pooled simulated values (0 = all)");
    }
};

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct Loaded {
    FactorPanel panel;
    std::vector<FundSeries> funds;
};

Loaded load_inputs(const InputOptions& in) {
    auto fstream = open_input(in.factors, "factor");
    FactorCsvFormat fmt;
    fmt.percent = in.percent;
    FactorPanel panel = ingest_factor_panel(fstream, fmt);
    if (panel.size() == 0) throw DataError("factor file has no rows");
    auto ustream = open_input(in.funds, "fund");
    std::vector<FundSeries> funds = ingest_funds(ustream);

    MonthId from = panel.first(), to = panel.last();
    try {
        if (!in.start.empty()) from = std::max(from, MonthId::parse(in.start));
        if (!in.end.empty()) to = std::min(to, MonthId::parse(in.end));
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
    if (to < from) throw UsageError("study period is empty");
    if (from != panel.first() || to != panel.last()) panel = panel.slice(from, to);
    for (auto& f : funds) f = f.restrict_to(from, to);
    return {std::move(panel), std::move(funds)};
}

Model resolve_model(const ModelOptions& mo, const FactorPanel& panel) {
    const Model m = parse_model(mo.model);
    try {
        panel.require(m);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    return m;
}

std::string period_label(const FactorPanel& panel) {
    return panel.first().str() + "-" + panel.last().str();
}

struct Fitted {
    std::vector<GroupMember> members;
    std::size_t admitted = 0;
    std::size_t fit_failures = 0;
};

Fitted fit_group(const Loaded& data, const ScreenConfig& scfg, Model model, const std::string& group,
                 unsigned threads) {
    const auto outcomes = run_screen(data.funds, data.panel, scfg, threads);
    if (group != "all") {
        bool known = false;
        for (double c : scfg.size_cutoffs) known = known || size_label(c) == group;
        if (!known) throw UsageError("unknown group '" + group + "'");
    }
    std::vector<AlignedSample> samples;
    Fitted out;
    for (const auto& o : outcomes) {
        if (!o.admitted) continue;
        ++out.admitted;
        if (group != "all" &&
            std::find(o.size_groups.begin(), o.size_groups.end(), group) == o.size_groups.end()) {
            continue;
        }
        samples.push_back(align(*o.trimmed, data.panel, model));
    }
    auto fits = batch_fit(samples, threads);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (auto* r = std::get_if<RegressionResult>(&fits[i])) {
            out.members.push_back({std::move(samples[i]), std::move(*r)});
        } else {
            ++out.fit_failures;
        }
    }
    return out;
}

void write_fits_csv(std::ostream& out, std::span<const GroupMember> members, Model model) {
    std::vector<std::string> names{"alpha"};
    for (Factor f : model_factors(model)) names.emplace_back(factor_name(f));
    out << "fund_id,n_obs";
    for (const auto& n : names) out << ',' << n;
    for (const auto& n : names) out << ",se_" << n;
    for (const auto& n : names) out << ",t_" << n;
    out << ",sigma2,degenerate\n";
    for (const auto& m : members) {
        const auto& r = m.fit;
        out << csv::escape(m.sample.fund_id) << ',' << r.n_obs;
        for (std::size_t j = 0; j < r.n_coef(); ++j) out << ',' << csv::format_decimal(r.coefficient(j));
        for (double v : r.se) out << ',' << csv::format_decimal(v);
        for (double v : r.tstats) out << ',' << (std::isnan(v) ? "" : csv::format_decimal(v));
        out << ',' << csv::format_decimal(r.sigma2) << ',' << (r.degenerate ? "true" : "false") << '\n';
    }
}

SimConfig make_sim_config(const SimOptions& so, Model model, unsigned threads) {
    SimConfig cfg;
    cfg.n_sims = so.sims;
    cfg.base_seed = so.seed;
    cfg.min_resampled_obs = so.min_resampled_obs;
    cfg.model = model;
    cfg.threads = threads;
    cfg.pooled_cap = so.pooled_cap;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SynthOptions {
    SynthConfig cfg;
    std::string out_dir;
    std::string start = "199001";
    std::string truth_model = "ff5";
    std::optional<std::size_t> incubation_month;

    void add(CLI::App& app) {
        app.add_option("--out-dir", out_dir, "Directory for factors.csv, funds.csv, truth.csv")->required();
        app.add_option("--funds", cfg.n_funds, "Number of funds");
        app.add_option("--months", cfg.n_months, "Number of months");
        app.add_option("--start", start, "First month (YYYYMM)");
        app.add_option("--seed", cfg.seed, "Seed");
        app.add_option("--truth-model", truth_model, "Factors carrying active-fund loadings");
        app.add_option("--active-alpha", cfg.active_alpha, "Monthly alpha of active funds");
        app.add_option("--skilled", cfg.n_skilled, "Active funds given --skilled-alpha");
        app.add_option("--skilled-alpha", cfg.skilled_alpha, "Monthly alpha of skilled funds");
        app.add_option("--idio-vol", cfg.idio_vol, "Monthly idiosyncratic volatility");
        app.add_option("--mix-active", cfg.mix.active, "Fraction of active funds");
        app.add_option("--mix-index", cfg.mix.index_tracker, "Fraction of index trackers");
        app.add_option("--mix-money-market", cfg.mix.money_market, "Fraction of money-market funds");
        app.add_option("--mix-leveraged", cfg.mix.leveraged, "Fraction of leveraged funds");
        app.add_option("--mix-incubating", cfg.mix.incubating, "Fraction of incubating funds");
        app.add_option("--incubation-month", incubation_month,
                       "Month offset at which incubating funds reach the AuM threshold");
        app.add_option("--missing-fraction", cfg.missing_fraction, "Share of unreported fund-months");
    }
};

void run_synth(SynthOptions& so, std::ostream& out) {
    SynthConfig cfg = so.cfg;
    try {
        cfg.start = MonthId::parse(so.start);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    }
    cfg.truth_model = parse_model(so.truth_model);
    cfg.incubation_month = so.incubation_month;
    const Universe u = generate_universe(cfg);
    const fs::path dir(so.out_dir);
    fs::create_directories(dir);
    {
        auto f = open_output(dir / "factors.csv");
        write_factor_panel(f, u.panel);
    }
    {
        auto f = open_output(dir / "funds.csv");
        write_funds(f, u.funds);
    }
    {
        auto f = open_output(dir / "truth.csv");
        write_truth_csv(f, u.truth);
    }
    out << "wrote " << u.funds.size() << " funds over " << u.panel.size() << " months to " << dir.string()
        << '\n';
}

struct FilterOptions {
    InputOptions in;
    ScreenOptions screen;
    std::string out_path;
};

void run_filter(FilterOptions& fo, std::ostream& out) {
    const ScreenConfig scfg = fo.screen.resolve();
    const Loaded data = load_inputs(fo.in);
    const auto outcomes = run_screen(data.funds, data.panel, scfg, fo.in.threads);
    auto f = open_output(fo.out_path);
    write_screen_csv(f, outcomes);
    const auto admitted = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.admitted; });
    out << admitted << " of " << outcomes.size() << " funds admitted\n";
}

struct FitOptions {
    InputOptions in;
    ScreenOptions screen;
    ModelOptions model;
    std::string out_path;
    std::string summary_path;
};

void run_fit(FitOptions& fo, std::ostream& out) {
    const ScreenConfig scfg = fo.screen.resolve();
    const Loaded data = load_inputs(fo.in);
    const Model model = resolve_model(fo.model, data.panel);
    const Fitted fitted = fit_group(data, scfg, model, fo.model.group, fo.in.threads);
    {
        auto f = open_output(fo.out_path);
        write_fits_csv(f, fitted.members, model);
    }
    if (!fo.summary_path.empty() && !fitted.members.empty()) {
        std::vector<RegressionResult> fits;
        for (const auto& m : fitted.members) fits.push_back(m.fit);
        auto f = open_output(fo.summary_path);
        write_coefficient_summary_csv(f, build_coefficient_summary(fits, model, fo.model.group));
    }
    out << fitted.members.size() << " funds fitted (" << fitted.fit_failures << " failed)\n";
}

struct SimulateOptions {
    InputOptions in;
    ScreenOptions screen;
    ModelOptions model;
    SimOptions sim;
    std::string out_prefix;
};

void run_simulate(SimulateOptions& so, std::ostream& out) {
    const ScreenConfig scfg = so.screen.resolve();
    const Loaded data = load_inputs(so.in);
    const Model model = resolve_model(so.model, data.panel);
    const SimConfig cfg = make_sim_config(so.sim, model, so.in.threads);
    const Fitted fitted = fit_group(data, scfg, model, so.model.group, so.in.threads);
    if (fitted.members.empty()) throw DataError("group '" + so.model.group + "' has no fitted funds");
    const auto sim = run_simulation(fitted.members, data.panel, cfg);
    const fs::path prefix(so.out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    write_simulation(prefix, sim);
    out << sim.n_sims() << " runs over " << fitted.members.size() << " funds, " << sim.empty_runs
        << " empty runs\n";
}

struct ReportOptions {
    InputOptions in;
    ScreenOptions screen;
    ModelOptions model;
    SimOptions sim;
    std::string out_dir;
    std::string mode = "pooled";
    std::string period;
    std::string from_sim;
};

void run_report(ReportOptions& ro, std::ostream& out) {
    const PctBelowMode mode = parse_pct_below_mode(ro.mode);
    const fs::path dir(ro.out_dir);
    ReportLabels labels;
    labels.group = ro.model.group;
    labels.model = csv::lower(ro.model.model);
    ReportProvenance prov;
    prov.seed = ro.sim.seed;

    SimulationOutput sim;
    std::optional<CoefficientSummary> summary;
    if (!ro.from_sim.empty()) {
        (void)parse_model(ro.model.model);
        sim = read_simulation(ro.from_sim);
        labels.period = ro.period.empty() ? "unspecified" : ro.period;
    } else {
        if (ro.in.factors.empty() || ro.in.funds.empty()) {
            throw UsageError("report needs --factors and --funds, or --from-sim");
        }
        const ScreenConfig scfg = ro.screen.resolve();
        const Loaded data = load_inputs(ro.in);
        const Model model = resolve_model(ro.model, data.panel);
        const SimConfig cfg = make_sim_config(ro.sim, model, ro.in.threads);
        const Fitted fitted = fit_group(data, scfg, model, ro.model.group, ro.in.threads);
        if (fitted.members.empty()) throw DataError("group '" + ro.model.group + "' has no fitted funds");
        sim = run_simulation(fitted.members, data.panel, cfg);
        labels.period = ro.period.empty() ? period_label(data.panel) : ro.period;
        std::vector<RegressionResult> fits;
        for (const auto& m : fitted.members) fits.push_back(m.fit);
        summary = build_coefficient_summary(fits, model, ro.model.group);
    }
    prov.n_sims = sim.n_sims();
    prov.empty_runs = sim.empty_runs;
    prov.pooled_exact = sim.pooled_exact;

    const PercentileReport rep = build_percentile_report(sim, mode, labels);
    fs::create_directories(dir);
    {
        auto f = open_output(dir / "report.csv");
        write_report_csv(f, rep);
    }
    {
        auto f = open_output(dir / "report.json");
        write_report_sidecar(f, rep, prov);
    }
    {
        auto f = open_output(dir / "table.txt");
        write_report_table(f, rep);
    }
    emit_cdf(sim.actual, sim.pooled_sim, dir / "cdf.csv");
    if (summary) {
        auto f = open_output(dir / "coefficients.csv");
        write_coefficient_summary_csv(f, *summary);
    }
    write_report_table(out, rep);
    if (sim.empty_runs > 0) out << "warning: " << sim.empty_runs << " runs had no usable funds\n";
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

// Replaces `--config FILE` with one `--key=value` argument per line of FILE,
// placed right after the subcommand so later command-line flags win.
// Lines are TOML-style `key = value`; `#` starts a comment and [sections]
// are ignored.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (!path) return args;
    std::ifstream in(*path);
    if (!in) throw UsageError("config file not found: " + *path);

    std::vector<std::string> injected;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        char quote = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (quote) {
                if (line[i] == quote) quote = 0;
            } else if (line[i] == '"' || line[i] == '\'') {
                quote = line[i];
            } else if (line[i] == '#') {
                line.erase(i);
                break;
            }
        }
        const std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '[') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError(*path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(trimmed.substr(0, eq));
        std::string value = trim(trimmed.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        std::replace(key.begin(), key.end(), '_', '-');
        injected.push_back("--" + key + "=" + value);
    }
    const auto sub = std::find_if(out.begin(), out.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    const auto at = sub == out.end() ? out.begin() : sub + 1;
    out.insert(at, injected.begin(), injected.end());
    return out;
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Luck versus skill in mutual fund returns: screening, factor regressions and a "
                 "zero-alpha bootstrap of t(alpha)"};
    app.name("fundalpha");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value file; command-line flags override it");
    };

    SynthOptions synth_o;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic universe with known truth");
    add_config(synth);
    synth_o.add(*synth);

    FilterOptions filter_o;
    auto* filter = app.add_subcommand("filter", "Apply the fund screens");
    add_config(filter);
    filter_o.in.add(*filter);
    filter_o.screen.add(*filter);
    filter->add_option("--out", filter_o.out_path, "Screen outcome CSV")->required();

    FitOptions fit_o;
    auto* fit = app.add_subcommand("fit", "Fit a factor model to every admitted fund");
    add_config(fit);
    fit_o.in.add(*fit);
    fit_o.screen.add(*fit);
    fit_o.model.add(*fit);
    fit->add_option("--out", fit_o.out_path, "Per-fund fit CSV")->required();
    fit->add_option("--summary", fit_o.summary_path, "Coefficient summary CSV");

    SimulateOptions sim_o;
    auto* simulate = app.add_subcommand("simulate", "Run the zero-alpha bootstrap");
    add_config(simulate);
    sim_o.in.add(*simulate);
    sim_o.screen.add(*simulate);
    sim_o.model.add(*simulate);
    sim_o.sim.add(*simulate);
    simulate->add_option("--out-prefix", sim_o.out_prefix, "Prefix of the simulation artifacts")
        ->required();

    ReportOptions rep_o;
    auto* report = app.add_subcommand("report", "Percentile tables, CDFs and coefficient summary");
    add_config(report);
    report->add_option("--factors", rep_o.in.factors, "Factor CSV");
    report->add_option("--funds", rep_o.in.funds, "Fund CSV");
    report->add_flag("--factors-percent", rep_o.in.percent, "Factor file values are in percent");
    report->add_option("--start", rep_o.in.start, "First month of the study period (YYYYMM)");
    report->add_option("--end", rep_o.in.end, "Last month of the study period (YYYYMM)");
    report->add_option("--threads", rep_o.in.threads, "Worker threads, 0 = all cores");
    rep_o.screen.add(*report);
    rep_o.model.add(*report);
    rep_o.sim.add(*report);
    report->add_option("--out-dir", rep_o.out_dir, "Output directory")->required();
    report->add_option("--pct-below-mode", rep_o.mode, "pooled | per-run");
    report->add_option("--period", rep_o.period, "Period label");
    report->add_option("--from-sim", rep_o.from_sim, "Build from artifacts written by `simulate`");

    try {
        std::vector<std::string> expanded;
        try {
            expanded = expand_config(args);
        } catch (const UsageError& e) {
            err << "fundalpha: usage error: " << e.what() << '\n';
            return 2;
        }
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) run_synth(synth_o, out);
        else if (filter->parsed()) run_filter(filter_o, out);
        else if (fit->parsed()) run_fit(fit_o, out);
        else if (simulate->parsed()) run_simulate(sim_o, out);
        else if (report->parsed()) run_report(rep_o, out);
    } catch (const UsageError& e) {
        err << "fundalpha: usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        err << "fundalpha: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "fundalpha: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

} // namespace fundalpha
