#include "gvckit/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gvckit/decomp.hpp"
#include "gvckit/error.hpp"
#include "gvckit/event_study.hpp"
#include "gvckit/io.hpp"
#include "gvckit/mrio.hpp"
#include "gvckit/trade.hpp"

namespace gvckit::app {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys = {
        {"out", ".", "workspace root; runs write to <out>/outputs/<run-id>/, synth writes <out>/inputs/"},
        {"mrio", "", "comma-separated canonical MRIO CSV files, one per year"},
        {"trades", "", "trade CSV (reporter,partner,flow,hs2,year,month,value)"},
        {"controls", "", "controls CSV (country,year,pop_growth,gdp_pc_growth,geo_dist,socio_cond,invest_profile)"},
        {"sector_map", "", "HS chapter to sector CSV; the bundled nine-sector map when empty"},
        {"corridors", "", "exporter>importer pairs for indices.csv, comma-separated; all ordered pairs when empty"},
        {"sector_groups", "total:*;C3-C16:C3..C16", "semicolon-separated name:SPEC sector groups"},
        {"threads", "0", "worker threads for the all-pairs decomposition (0 = hardware concurrency)"},
        {"panels", "CHN:X,USA:M", "reporter:flow panels for event-study; the first two feed dual_positive.csv"},
        {"deviation_panels", "", "reporter:flow series for deviations; every pair in the trade file when empty"},
        {"window", "A", "event window: A, B, C or custom"},
        {"baseline", "2016-01..2018-09", "baseline span for a custom window"},
        {"post", "", "post span for a custom window, YYYY-MM..YYYY-MM"},
        {"alpha", "0.10", "significance threshold, in (0, 1]"},
        {"se", "robust", "standard errors: robust (HC1), classic or cluster (by partner)"},
        {"denominator", "included", "trade-share denominator: included partners or world (WLD rows)"},
        {"exclude", "", "partners removed from the control pool"},
        {"aggregate_sectors", "chemicals,machinery,materials,miscellaneous,transport", "sectors summed for aggregate.csv"},
        {"seed", "", "generator seed (synth); recorded in run metadata"},
        {"synth_countries", "5", "synthetic MRIO country count"},
        {"synth_sectors", "4", "synthetic MRIO sector count"},
        {"synth_years", "2015..2023", "synthetic MRIO years"},
        {"synth_density", "0.6", "share of nonzero input coefficients"},
        {"synth_inventory", "false", "plant one negative final-demand cell per table"},
        {"synth_partners", "DEU,IND,JPN,KOR,MEX,MYS,THA,VNM", "synthetic trade partners"},
        {"synth_panel_sectors", "chemicals,machinery,materials,miscellaneous,transport", "synthetic trade sectors"},
        {"synth_months", "96", "synthetic months from January 2016"},
        {"synth_noise_sd", "0.3", "share noise, percentage points"},
        {"synth_effects",
         "CHN:X:VNM|machinery|2018-10|4;CHN:X:MEX|transport|2018-10|4;CHN:X:THA|chemicals|2018-10|3;"
         "CHN:X:IND|materials|2018-10|3;CHN:X:MYS|miscellaneous|2018-10|3;USA:M:VNM|machinery|2018-10|4;"
         "USA:M:MEX|transport|2018-10|3;USA:M:KOR|chemicals|2018-10|3;USA:M:THA|materials|2018-10|3;"
         "USA:M:IND|miscellaneous|2018-10|3",
         "planted effects, reporter:flow:partner|sector|start|pp separated by semicolons"},
    };
    return keys;
}

namespace {

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : config_keys())
        if (k.key == key) return &k;
    return nullptr;
}

std::string timestamp_now() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        auto v = io::parse_int(epoch);
        if (!v) throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
        t = static_cast<std::time_t>(*v);
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// One command invocation: owns the output directory and writes the manifest last.
class Run {
public:
    Run(std::string command, const RunConfig& config, fs::path dir)
        : command_(std::move(command)), config_(config), dir_(std::move(dir)), started_(timestamp_now()) {}

    static Run in_outputs(const std::string& command, const RunConfig& config) {
        const auto id = command + "-" + io::sha256_hex(command + "\n" + config.snapshot()).substr(0, 12);
        auto dir = config.path("out") / "outputs" / id;
        if (fs::exists(dir)) fs::remove_all(dir);
        fs::create_directories(dir);
        Run run(command, config, dir);
        run.run_id_ = id;
        return run;
    }

    const fs::path& dir() const { return dir_; }

    void input(const fs::path& p) {
        inputs_.push_back({{"path", p.lexically_normal().string()}, {"sha256", io::sha256_file(p)}});
    }

    void write(const std::string& name, const std::string& content) {
        io::write_file_atomic(dir_ / name, content);
        files_[name] = {{"sha256", io::sha256_hex(content)}, {"bytes", content.size()}};
    }

    void warn(const std::string& msg) { warnings_.push_back(msg); }
    json& metadata() { return metadata_; }
    std::vector<std::string>& warnings() { return warnings_; }

    void finish(int exit_code) {
        json m;
        m["tool"] = "gvckit";
        m["version"] = kToolVersion;
        m["command"] = command_;
        m["run_id"] = run_id_;
        m["exit_code"] = exit_code;
        json cfg = json::object();
        for (const auto& [k, v] : config_.values) cfg[k] = v;
        m["config"] = cfg;
        m["inputs"] = inputs_.empty() ? json::array() : json(inputs_);
        m["started_at"] = started_;
        m["finished_at"] = timestamp_now();
        m["warnings"] = warnings_;
        json files = json::array();
        for (const auto& [name, info] : files_) {
            json f = info;
            f["name"] = name;
            files.push_back(f);
        }
        m["files"] = files;
        m["metadata"] = metadata_;
        io::write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    const RunConfig& config_;
    fs::path dir_;
    std::string run_id_;
    std::string started_;
    std::vector<json> inputs_;
    std::map<std::string, json> files_;
    std::vector<std::string> warnings_;
    json metadata_ = json::object();
};

json tolerance_metadata() {
    return {{"balance_relative", tolerance::kBalanceRelative},
            {"leontief_residual", tolerance::kLeontiefResidual},
            {"value_closure", tolerance::kValueClosure},
            {"max_condition", tolerance::kMaxCondition}};
}

std::vector<MrioTable> load_tables(const RunConfig& config, Run& run) {
    std::vector<MrioTable> tables;
    for (const auto& p : config.paths("mrio")) {
        run.input(p);
        tables.push_back(load_mrio(p));
    }
    if (tables.empty()) throw ConfigError("no MRIO inputs configured (key 'mrio')");
    std::stable_sort(tables.begin(), tables.end(), [](const auto& a, const auto& b) { return a.year < b.year; });
    return tables;
}

std::vector<std::pair<std::string, Flow>> parse_panels(const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, Flow>> out;
    for (const auto& item : items) {
        auto parts = io::split(item, ':');
        if (parts.size() != 2) throw ConfigError("panel '" + item + "' must look like REPORTER:X or REPORTER:M");
        try {
            out.emplace_back(io::trim(parts[0]), parse_flow(io::trim(parts[1])));
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

MonthSpan parse_span(const std::string& text, const std::string& key) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw ConfigError(key + " must look like YYYY-MM..YYYY-MM");
    try {
        return {parse_month_label(text.substr(0, dots)), parse_month_label(text.substr(dots + 2))};
    } catch (const InvalidInput& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

EventWindow configured_window(const RunConfig& config) {
    const auto label = config.get("window");
    EventWindow w;
    if (label == "custom") {
        if (config.get("post").empty()) throw ConfigError("custom window needs key 'post'");
        w = {"custom", parse_span(config.get("baseline"), "baseline"), parse_span(config.get("post"), "post")};
    } else {
        try {
            w = builtin_window(label);
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        w.check();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    return w;
}

EventStudyOptions configured_options(const RunConfig& config) {
    EventStudyOptions o;
    o.alpha = config.number("alpha");
    if (!(o.alpha > 0.0 && o.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    try {
        o.se_mode = parse_se_mode(config.get("se"));
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    o.exclude = config.list("exclude");
    return o;
}

Denominator configured_denominator(const RunConfig& config) {
    try {
        return parse_denominator(config.get("denominator"));
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
}

struct TradeInputs {
    std::vector<TradeRecord> records;
    std::vector<SectorRecord> sector_records;
    Controls controls;
    bool has_controls = false;
};

TradeInputs load_trade_inputs(const RunConfig& config, Run& run, bool need_controls) {
    TradeInputs in;
    if (config.get("trades").empty()) throw ConfigError("no trade input configured (key 'trades')");
    const auto trades = config.path("trades");
    run.input(trades);
    auto loaded = load_trades(trades);
    for (auto& w : loaded.warnings) run.warn(w);
    in.records = std::move(loaded.records);
    SectorMap map = SectorMap::default_map();
    if (!config.get("sector_map").empty()) {
        run.input(config.path("sector_map"));
        map = SectorMap::load(config.path("sector_map"));
    }
    in.sector_records = apply_sector_map(in.records, map);
    if (!config.get("controls").empty()) {
        run.input(config.path("controls"));
        in.controls = load_controls(config.path("controls"));
        in.has_controls = true;
    } else if (need_controls) {
        throw ConfigError("no controls input configured (key 'controls')");
    }
    return in;
}

// Every configured input path must exist before a command starts.
void require_inputs(const RunConfig& config, std::initializer_list<const char*> keys) {
    for (const char* key : keys)
        for (const auto& p : config.paths(key))
            if (!fs::exists(p)) throw ConfigError("input '" + std::string(key) + "' not found: " + p.string());
}

std::string span_json_text(const MonthSpan& s) { return month_label(s.first) + ".." + month_label(s.last); }

template <typename Fn>
CommandResult guarded(Fn&& body) {
    CommandResult result;
    try {
        result = body();
    } catch (const ConfigError& e) {
        result.exit_code = kConfigError;
        result.messages.push_back(std::string("configuration error: ") + e.what());
    } catch (const NumericalError& e) {
        result.exit_code = kNumericalFailure;
        result.messages.push_back(std::string("numerical failure: ") + e.what());
    } catch (const DegenerateFit& e) {
        result.exit_code = kNumericalFailure;
        result.messages.push_back(std::string("numerical failure: ") + e.what());
    } catch (const ParseError& e) {
        result.exit_code = kValidationFailure;
        result.messages.push_back(std::string("input error: ") + e.what());
    } catch (const InvalidInput& e) {
        result.exit_code = kValidationFailure;
        result.messages.push_back(std::string("input error: ") + e.what());
    } catch (const std::exception& e) {
        result.exit_code = kValidationFailure;
        result.messages.push_back(std::string("error: ") + e.what());
    }
    return result;
}

std::string finding_text(const Finding& f) {
    std::ostringstream s;
    s << (f.severity == Severity::Violation ? "VIOLATION " : "WARNING ") << f.check;
    if (f.row >= 0) s << " row=" << f.row;
    if (f.column >= 0) s << " column=" << f.column;
    s << " magnitude=" << io::format_double(f.magnitude) << " : " << f.message;
    return s.str();
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto l = io::trim(line);
        if (l.empty() || l[0] == '#') continue;
        const auto eq = l.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        c.set(io::trim(l.substr(0, eq)), io::trim(l.substr(eq + 1)), base_dir);
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse(io::read_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void RunConfig::set(const std::string& key, const std::string& value, const fs::path& base_dir) {
    if (!find_key(key)) throw ConfigError("unknown configuration key '" + key + "'");
    values[key] = value;
    base_dirs[key] = base_dir;
}

std::string RunConfig::get(const std::string& key) const {
    if (auto it = values.find(key); it != values.end()) return it->second;
    const auto* spec = find_key(key);
    if (!spec) throw ConfigError("unknown configuration key '" + key + "'");
    return spec->default_value;
}

std::vector<std::string> RunConfig::list(const std::string& key, char sep) const {
    std::vector<std::string> out;
    for (const auto& item : io::split(get(key), sep)) {
        auto t = io::trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

fs::path RunConfig::path(const std::string& key) const {
    fs::path p = get(key);
    if (p.is_relative()) {
        auto it = base_dirs.find(key);
        if (it != base_dirs.end()) p = it->second / p;
    }
    return p.lexically_normal();
}

std::vector<fs::path> RunConfig::paths(const std::string& key) const {
    std::vector<fs::path> out;
    for (const auto& item : list(key)) {
        fs::path p = item;
        if (p.is_relative()) {
            auto it = base_dirs.find(key);
            if (it != base_dirs.end()) p = it->second / p;
        }
        out.push_back(p.lexically_normal());
    }
    return out;
}

double RunConfig::number(const std::string& key) const {
    auto v = io::parse_double(get(key));
    if (!v || !std::isfinite(*v)) throw ConfigError("key '" + key + "' must be a number, got '" + get(key) + "'");
    return *v;
}

std::string RunConfig::snapshot() const {
    std::string out;
    for (const auto& [k, v] : values) out += k + " = " + v + "\n";
    return out;
}

CommandResult cmd_validate(const RunConfig& config) {
    return guarded([&] {
        CommandResult result;
        require_inputs(config, {"mrio", "trades", "controls", "sector_map"});
        auto run = Run::in_outputs("validate", config);
        result.output_dir = run.dir();
        std::ostringstream report;
        std::size_t violations = 0;

        for (const auto& p : config.paths("mrio")) {
            report << "# mrio " << p.filename().string() << '\n';
            try {
                run.input(p);
                const auto table = load_mrio(p);
                const auto r = validate_mrio(table);
                for (const auto& f : r.findings) report << finding_text(f) << '\n';
                if (!r.passed()) ++violations;
                report << (r.passed() ? "PASS" : "FAIL") << '\n';
            } catch (const std::exception& e) {
                report << "VIOLATION parse : " << e.what() << "\nFAIL\n";
                ++violations;
            }
        }

        if (!config.get("trades").empty()) {
            report << "# trades " << config.path("trades").filename().string() << '\n';
            try {
                auto in = load_trade_inputs(config, run, false);
                for (const auto& w : run.warnings()) report << "WARNING " << w << '\n';
                if (in.has_controls) {
                    std::set<std::pair<std::string, Flow>> pairs;
                    for (const auto& r : in.records) pairs.insert({r.reporter, r.flow});
                    for (const auto& [reporter, flow] : pairs) {
                        try {
                            PanelOptions opt;
                            opt.denominator = configured_denominator(config);
                            build_panel(in.sector_records, in.controls, reporter, flow, opt);
                        } catch (const InvalidInput& e) {
                            report << "VIOLATION controls " << reporter << ':' << flow_code(flow) << " : " << e.what()
                                   << '\n';
                            ++violations;
                        }
                    }
                }
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                report << "VIOLATION trades : " << e.what() << '\n';
                ++violations;
            }
            report << (violations ? "FAIL" : "PASS") << '\n';
        }

        result.exit_code = violations ? kValidationFailure : kOk;
        report << "# result " << (violations ? "FAIL" : "PASS") << '\n';
        run.write("validation_report.txt", report.str());
        run.metadata()["tolerances"] = tolerance_metadata();
        run.metadata()["failed_inputs"] = violations;
        run.finish(result.exit_code);
        if (violations) result.messages.push_back("validation failed; see " + (run.dir() / "validation_report.txt").string());
        return result;
    });
}

CommandResult cmd_decompose(const RunConfig& config) {
    return guarded([&] {
        CommandResult result;
        require_inputs(config, {"mrio"});
        auto run = Run::in_outputs("decompose", config);
        result.output_dir = run.dir();
        const auto tables = load_tables(config, run);
        const auto& first = tables.front();
        for (const auto& t : tables)
            if (t.countries != first.countries || t.sectors != first.sectors)
                throw InvalidInput("MRIO year " + std::to_string(t.year) + " has a different country/sector layout");
        for (std::size_t k = 1; k < tables.size(); ++k)
            if (tables[k].year == tables[k - 1].year)
                throw InvalidInput("MRIO year " + std::to_string(tables[k].year) + " supplied twice");

        std::vector<SectorGroup> groups;
        for (const auto& spec : config.list("sector_groups", ';')) {
            try {
                groups.push_back(parse_sector_group(spec, first.sectors));
            } catch (const InvalidInput& e) {
                if (config.has("sector_groups")) throw ConfigError(e.what());
                run.warn(std::string("default sector group skipped: ") + e.what());
            }
        }
        if (groups.empty()) throw ConfigError("no usable sector groups");

        std::vector<std::pair<std::string, std::string>> corridors;
        for (const auto& c : config.list("corridors")) {
            auto gt = c.find('>');
            if (gt == std::string::npos) throw ConfigError("corridor '" + c + "' must look like EXP>IMP");
            corridors.emplace_back(io::trim(c.substr(0, gt)), io::trim(c.substr(gt + 1)));
            for (const auto& code : {corridors.back().first, corridors.back().second})
                if (std::find(first.countries.begin(), first.countries.end(), code) == first.countries.end())
                    throw ConfigError("corridor '" + c + "' names unknown country '" + code + "'");
            if (corridors.back().first == corridors.back().second) throw ConfigError("corridor '" + c + "' is not bilateral");
        }

        const auto threads = static_cast<unsigned>(config.number("threads"));
        std::ostringstream decomp, idx;
        write_decomp_header(decomp);
        write_indices_header(idx);
        json years = json::array();
        for (const auto& table : tables) {
            const auto report = validate_mrio(table);
            for (const auto& f : report.warnings()) run.warn(std::to_string(table.year) + ": " + finding_text(f));
            if (!report.passed()) {
                std::string msg = "MRIO year " + std::to_string(table.year) + " fails validation";
                for (const auto& f : report.violations()) msg += "\n  " + finding_text(f);
                throw InvalidInput(msg);
            }
            const auto coef = coefficients(table);
            const auto all = decompose_all(table, coef, threads);
            for (const auto& g : all) write_decomp_rows(decomp, g);

            std::map<std::pair<std::string, std::string>, const DecompGroups*> by_pair;
            for (const auto& g : all) by_pair[{g.exporter, g.importer}] = &g;
            auto lookup = [&](const std::string& s, const std::string& r) -> const DecompGroups& {
                return *by_pair.at({s, r});
            };
            std::vector<std::pair<std::string, std::string>> pairs = corridors;
            if (pairs.empty())
                for (const auto& g : all) pairs.emplace_back(g.exporter, g.importer);
            for (const auto& [s, r] : pairs)
                for (const auto& grp : groups)
                    write_indices_row(idx, table.year, s, r, grp.name, indices(lookup(s, r), grp.sectors));
            years.push_back({{"year", table.year},
                             {"condition_estimate", coef.condition_estimate},
                             {"leontief_residual", coef.leontief_residual},
                             {"local_residual", coef.local_residual},
                             {"refined", coef.refined}});
        }
        run.write("decomp.csv", decomp.str());
        run.write("indices.csv", idx.str());
        run.metadata()["tolerances"] = tolerance_metadata();
        run.metadata()["years"] = years;
        run.metadata()["threads"] = threads;
        json g = json::object();
        for (const auto& grp : groups) g[grp.name] = grp.sectors;
        run.metadata()["sector_groups"] = g;
        run.finish(kOk);
        return result;
    });
}

CommandResult cmd_event_study(const RunConfig& config) {
    return guarded([&] {
        CommandResult result;
        const auto window = configured_window(config);
        const auto options = configured_options(config);
        const auto denominator = configured_denominator(config);
        const auto panels = parse_panels(config.list("panels"));
        if (panels.empty()) throw ConfigError("no panels configured");
        require_inputs(config, {"trades", "controls", "sector_map"});

        auto run = Run::in_outputs("event-study", config);
        result.output_dir = run.dir();
        auto in = load_trade_inputs(config, run, true);

        std::vector<EffectMatrix> matrices;
        std::vector<Panel> built;
        std::ostringstream effects, aggregate;
        write_effects_header(effects);
        aggregate << "reporter,flow,window,partner,sectors,gamma,se,t,p,significant,estimable\n";
        json panel_meta = json::array();
        const auto agg_sectors = config.list("aggregate_sectors");
        for (const auto& [reporter, flow] : panels) {
            PanelOptions popt;
            popt.denominator = denominator;
            auto panel = build_panel(in.sector_records, in.controls, reporter, flow, popt);
            auto matrix = scan_all(panel, window, options);
            write_effects_rows(effects, matrix);

            bool have_all = !agg_sectors.empty();
            for (const auto& s : agg_sectors)
                have_all = have_all && std::find(panel.sectors.begin(), panel.sectors.end(), s) != panel.sectors.end();
            if (have_all) {
                for (const auto& e : aggregate_sector_effect(panel, agg_sectors, window, options)) {
                    aggregate << reporter << ',' << flow_code(flow) << ',' << window.label << ',' << e.partner << ','
                              << e.sector << ',';
                    if (e.estimable && std::isfinite(e.p_value))
                        aggregate << io::format_double(e.gamma) << ',' << io::format_double(e.se) << ','
                                  << io::format_double(e.t_stat) << ',' << io::format_double(e.p_value) << ','
                                  << (e.significant ? "true" : "false") << ",true\n";
                    else
                        aggregate << ",,,,false," << (e.estimable ? "true" : "false") << '\n';
                }
            } else {
                run.warn(reporter + ":" + flow_code(flow) + ": aggregate sectors not all present; aggregate skipped");
            }
            panel_meta.push_back({{"reporter", reporter},
                                  {"flow", flow_code(flow)},
                                  {"panel_hash", panel.content_hash()},
                                  {"partners", panel.partners},
                                  {"sectors", panel.sectors},
                                  {"imputed_zeros", panel.imputed_zeros},
                                  {"zero_denominator_cells", panel.zero_denominator_cells},
                                  {"tests", matrix.tests}});
            matrices.push_back(std::move(matrix));
            built.push_back(std::move(panel));
        }

        std::ostringstream heatmap, dual;
        write_heatmap(heatmap, matrices);
        DualPositive dp;
        if (matrices.size() >= 2) {
            dp = dual_positive(matrices[0], matrices[1], options.alpha);
            for (const auto& w : dp.warnings) run.warn("dual_positive: " + w);
        } else {
            run.warn("dual_positive.csv is empty: fewer than two panels configured");
        }
        write_dual_positive(dual, dp);

        run.write("effects.csv", effects.str());
        run.write("heatmap.csv", heatmap.str());
        run.write("dual_positive.csv", dual.str());
        run.write("aggregate.csv", aggregate.str());

        auto& m = run.metadata();
        m["window"] = {{"label", window.label},
                       {"baseline", span_json_text(window.baseline)},
                       {"post", span_json_text(window.post)}};
        m["alpha"] = options.alpha;
        m["se_mode"] = se_mode_name(options.se_mode);
        m["denominator"] = denominator_name(denominator);
        m["exclude"] = options.exclude;
        m["panels"] = panel_meta;
        m["multiple_testing_adjustment"] = "none";
        if (!config.get("seed").empty()) m["seed"] = config.get("seed");
        run.finish(kOk);
        return result;
    });
}

CommandResult cmd_deviations(const RunConfig& config) {
    return guarded([&] {
        CommandResult result;
        require_inputs(config, {"trades", "sector_map"});
        auto run = Run::in_outputs("deviations", config);
        result.output_dir = run.dir();
        auto in = load_trade_inputs(config, run, false);

        auto panels = parse_panels(config.list("deviation_panels"));
        if (panels.empty()) {
            std::set<std::pair<std::string, Flow>> pairs;
            for (const auto& r : in.records) pairs.insert({r.reporter, r.flow});
            panels.assign(pairs.begin(), pairs.end());
        }
        std::ostringstream out;
        out << "reporter,flow,granularity,period,deviation,defined\n";
        std::size_t undefined = 0;
        for (const auto& [reporter, flow] : panels) {
            for (auto g : {Granularity::Month, Granularity::Quarter}) {
                const auto series = deviation_series(in.records, reporter, flow, g);
                for (const auto& p : series.points) {
                    out << reporter << ',' << flow_code(flow) << ',' << (g == Granularity::Month ? "month" : "quarter")
                        << ',' << p.period << ',' << (p.defined ? io::format_double(p.deviation) : "") << ','
                        << (p.defined ? "true" : "false") << '\n';
                    if (!p.defined) ++undefined;
                }
            }
        }
        if (undefined) run.warn(std::to_string(undefined) + " periods undefined (zero baseline)");
        run.write("deviations.csv", out.str());
        run.metadata()["baseline"] = "2016-01..2017-12, matched by calendar month";
        run.finish(kOk);
        return result;
    });
}

CommandResult cmd_synth(const RunConfig& config) {
    return guarded([&] {
        CommandResult result;
        if (config.get("seed").empty()) throw ConfigError("synth requires a seed (key 'seed')");
        const auto seed_v = io::parse_int(config.get("seed"));
        if (!seed_v || *seed_v < 0) throw ConfigError("seed must be a non-negative integer");
        const auto seed = static_cast<std::uint64_t>(*seed_v);

        const auto inputs = config.path("out") / "inputs";
        fs::create_directories(inputs);
        Run run("synth", config, inputs);
        result.output_dir = inputs;

        // MRIO years share one structure; cross-border coefficients deepen over time.
        auto years_text = config.get("synth_years");
        const auto dots = years_text.find("..");
        auto y0 = io::parse_int(years_text.substr(0, dots));
        auto y1 = dots == std::string::npos ? y0 : io::parse_int(years_text.substr(dots + 2));
        if (!y0 || !y1 || *y1 < *y0) throw ConfigError("synth_years must look like YYYY..YYYY");
        SynthMrioSpec ms;
        ms.countries = static_cast<std::size_t>(config.number("synth_countries"));
        ms.sectors = static_cast<std::size_t>(config.number("synth_sectors"));
        ms.density = config.number("synth_density");
        ms.inventory = config.get("synth_inventory") == "true";
        ms.seed = seed;
        if (ms.countries < 2 || ms.sectors < 1) throw ConfigError("synth needs at least 2 countries and 1 sector");
        std::vector<std::string> mrio_files;
        const long span = std::max<long>(1, *y1 - *y0);
        for (long y = *y0; y <= *y1; ++y) {
            ms.year = static_cast<int>(y);
            ms.foreign_scale = 0.7 + 0.3 * static_cast<double>(y - *y0) / static_cast<double>(span);
            const auto table = synth_mrio(ms);
            const auto name = "mrio_" + std::to_string(y) + ".csv";
            write_mrio(table, inputs / name);
            run.write(name, io::read_file(inputs / name));
            mrio_files.push_back(name);
        }

        std::vector<SynthPanelSpec> specs;
        for (const auto& [reporter, flow] : parse_panels(config.list("panels"))) {
            SynthPanelSpec ps;
            ps.reporter = reporter;
            ps.flow = flow;
            ps.partners = config.list("synth_partners");
            ps.partners.erase(std::remove(ps.partners.begin(), ps.partners.end(), reporter), ps.partners.end());
            ps.sectors = config.list("synth_panel_sectors");
            ps.months = static_cast<int>(config.number("synth_months"));
            ps.noise_sd = config.number("synth_noise_sd");
            ps.seed = seed + specs.size() + 1;
            specs.push_back(ps);
        }
        for (const auto& item : config.list("synth_effects", ';')) {
            auto parts = io::split(item, ':');
            if (parts.size() != 3) throw ConfigError("synth effect '" + item + "' must look like REP:FLOW:partner|sector|YYYY-MM|pp");
            auto fields = io::split(parts[2], '|');
            if (fields.size() != 4) throw ConfigError("synth effect '" + item + "' must look like REP:FLOW:partner|sector|YYYY-MM|pp");
            auto mag = io::parse_double(fields[3]);
            if (!mag) throw ConfigError("synth effect '" + item + "': bad magnitude");
            bool placed = false;
            for (auto& ps : specs) {
                if (ps.reporter == io::trim(parts[0]) && flow_code(ps.flow) == io::trim(parts[1])) {
                    try {
                        ps.effects.push_back({io::trim(fields[0]), io::trim(fields[1]), parse_month_label(fields[2]), *mag});
                    } catch (const InvalidInput& e) {
                        throw ConfigError(e.what());
                    }
                    placed = true;
                }
            }
            if (!placed) throw ConfigError("synth effect '" + item + "' names a panel that is not configured");
        }

        std::vector<TradeRecord> records;
        Controls controls;
        for (const auto& ps : specs) {
            const auto panel = synth_panel(ps);
            records.insert(records.end(), panel.records.begin(), panel.records.end());
            // One control set serves every panel: the first generator's paths win.
            for (const auto& [k, v] : panel.controls) controls.emplace(k, v);
            const auto truth = "truth_" + ps.reporter + "_" + flow_code(ps.flow) + ".txt";
            run.write(truth, ground_truth_text(ps));
        }
        std::sort(records.begin(), records.end(), [](const TradeRecord& a, const TradeRecord& b) {
            return std::tie(a.reporter, a.partner, a.flow, a.hs2, a.year, a.month) <
                   std::tie(b.reporter, b.partner, b.flow, b.hs2, b.year, b.month);
        });
        write_trades(records, inputs / "trades.csv");
        run.write("trades.csv", io::read_file(inputs / "trades.csv"));
        write_controls(controls, inputs / "controls.csv");
        run.write("controls.csv", io::read_file(inputs / "controls.csv"));
        SectorMap::default_map().write(inputs / "sector_map.csv");
        run.write("sector_map.csv", io::read_file(inputs / "sector_map.csv"));

        std::ostringstream cfg;
        cfg << "# generated by gvckit synth, seed " << seed << "\n";
        cfg << "mrio = ";
        for (std::size_t k = 0; k < mrio_files.size(); ++k) cfg << (k ? "," : "") << mrio_files[k];
        cfg << "\ntrades = trades.csv\ncontrols = controls.csv\nsector_map = sector_map.csv\n";
        cfg << "panels = " << config.get("panels") << "\nseed = " << seed << "\nout = ..\n";
        run.write("gvckit.cfg", cfg.str());

        run.metadata()["seed"] = seed;
        run.metadata()["mrio"] = {{"countries", ms.countries}, {"sectors", ms.sectors}, {"density", ms.density},
                                  {"inventory", ms.inventory}};
        run.finish(kOk);
        return result;
    });
}

int run_cli(int argc, char** argv) {
    CLI::App cli{"gvckit: value-added decomposition, GVC indices and trade event studies"};
    cli.require_subcommand(1);
    std::string config_path;
    std::map<std::string, std::string> overrides;
    std::map<std::string, std::function<CommandResult(const RunConfig&)>> commands = {
        {"validate", cmd_validate},
        {"decompose", cmd_decompose},
        {"event-study", cmd_event_study},
        {"deviations", cmd_deviations},
        {"synth", cmd_synth},
    };
    std::map<std::string, std::string> help = {
        {"validate", "check MRIO accounting identities, trade files and control coverage"},
        {"decompose", "value-added decomposition and GVC indices (decomp.csv, indices.csv)"},
        {"event-study", "difference-in-differences scan (effects.csv, heatmap.csv, dual_positive.csv)"},
        {"deviations", "deviations from 2016-2017 calendar-month baselines (deviations.csv)"},
        {"synth", "write synthetic MRIO, trade and control fixtures with ground truth"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, fn] : commands) {
        auto* sub = cli.add_subcommand(name, help[name]);
        sub->add_option("--config", config_path, "flat key = value configuration file");
        for (const auto& k : config_keys()) {
            std::string flag = "--" + k.key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            sub->add_option_function<std::string>(flag, [&overrides, key = k.key](const std::string& v) { overrides[key] = v; },
                                                  k.help);
        }
        subs.push_back(sub);
    }
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    CommandResult result;
    try {
        RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        for (const auto& [k, v] : overrides) config.set(k, v, fs::current_path());
        for (auto* sub : subs)
            if (sub->parsed()) result = commands.at(sub->get_name())(config);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    }
    for (const auto& m : result.messages) std::cerr << m << '\n';
    if (!result.output_dir.empty()) std::cout << result.output_dir.string() << '\n';
    return result.exit_code;
}

}  // namespace gvckit::app
