#include "gvckit/trade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "gvckit/error.hpp"
#include "gvckit/io.hpp"
#include "random.hpp"

namespace gvckit {

namespace {

constexpr int kBaseYear = 2016;
const char* kTradeHeader = "reporter,partner,flow,hs2,year,month,value";
const char* kControlsHeader = "country,year,pop_growth,gdp_pc_growth,geo_dist,socio_cond,invest_profile";
const char* kSectorMapHeader = "hs2,sector";

std::string chapter_code(int chapter) {
    std::string s = std::to_string(chapter);
    return chapter < 10 ? "0" + s : s;
}

bool valid_chapter(const std::string& hs2) {
    return hs2.size() == 2 && std::isdigit(static_cast<unsigned char>(hs2[0])) &&
           std::isdigit(static_cast<unsigned char>(hs2[1])) && hs2 != "00";
}

void expect_header(const std::vector<std::string>& lines, const std::string& file, const char* header) {
    if (lines.empty()) throw ParseError(file, 1, 0, "empty file; expected header '" + std::string(header) + "'");
    if (io::trim(lines[0]) != header)
        throw ParseError(file, 1, 0, "malformed header: expected '" + std::string(header) + "'");
}

using TradeKey = std::tuple<std::string, std::string, Flow, std::string, int, int>;

TradeKey key_of(const TradeRecord& r) { return {r.reporter, r.partner, r.flow, r.hs2, r.year, r.month}; }

}  // namespace

Flow parse_flow(const std::string& text) {
    if (text == "X") return Flow::Export;
    if (text == "M") return Flow::Import;
    throw InvalidInput("flow must be X or M, got '" + text + "'");
}

const char* flow_code(Flow flow) { return flow == Flow::Export ? "X" : "M"; }

int month_index(int year, int month) { return (year - kBaseYear) * 12 + (month - 1); }

int month_year(int index) {
    const int q = index >= 0 ? index / 12 : -((-index + 11) / 12);
    return kBaseYear + q;
}

int month_of_year(int index) { return index - (month_year(index) - kBaseYear) * 12 + 1; }

std::string month_label(int index) {
    const int m = month_of_year(index);
    return std::to_string(month_year(index)) + "-" + (m < 10 ? "0" : "") + std::to_string(m);
}

int parse_month_label(const std::string& text) {
    const auto parts = io::split(io::trim(text), '-');
    if (parts.size() != 2) throw InvalidInput("month must look like YYYY-MM, got '" + text + "'");
    auto y = io::parse_int(parts[0]);
    auto m = io::parse_int(parts[1]);
    if (!y || !m || *m < 1 || *m > 12) throw InvalidInput("month must look like YYYY-MM, got '" + text + "'");
    return month_index(static_cast<int>(*y), static_cast<int>(*m));
}

TradeLoad load_trades(const std::filesystem::path& path) {
    const auto file = path.string();
    auto lines = io::read_lines(path);
    expect_header(lines, file, kTradeHeader);

    std::map<TradeKey, std::pair<TradeRecord, std::size_t>> merged;
    TradeLoad out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (io::trim(lines[ln]).empty()) continue;
        const auto line_no = ln + 1;
        auto cells = io::split(lines[ln]);
        if (cells.size() != 7)
            throw ParseError(file, line_no, 0, "malformed row: expected 7 cells, found " + std::to_string(cells.size()));
        TradeRecord r;
        r.reporter = io::trim(cells[0]);
        r.partner = io::trim(cells[1]);
        if (r.reporter.empty()) throw ParseError(file, line_no, 1, "empty reporter");
        if (r.partner.empty()) throw ParseError(file, line_no, 2, "empty partner");
        if (r.reporter == r.partner) throw ParseError(file, line_no, 2, "reporter equals partner '" + r.partner + "'");
        const auto flow = io::trim(cells[2]);
        if (flow != "X" && flow != "M") throw ParseError(file, line_no, 3, "flow must be X or M, got '" + flow + "'");
        r.flow = parse_flow(flow);
        r.hs2 = io::trim(cells[3]);
        if (!valid_chapter(r.hs2)) throw ParseError(file, line_no, 4, "hs2 must be a two-digit chapter, got '" + r.hs2 + "'");
        auto year = io::parse_int(cells[4]);
        if (!year) throw ParseError(file, line_no, 5, "non-numeric year '" + cells[4] + "'");
        auto month = io::parse_int(cells[5]);
        if (!month) throw ParseError(file, line_no, 6, "non-numeric month '" + cells[5] + "'");
        if (*month < 1 || *month > 12) throw ParseError(file, line_no, 6, "bad month " + std::to_string(*month));
        auto value = io::parse_double(cells[6]);
        if (!value || !std::isfinite(*value)) throw ParseError(file, line_no, 7, "non-numeric value '" + cells[6] + "'");
        if (*value < 0.0) throw ParseError(file, line_no, 7, "negative value " + io::trim(cells[6]));
        r.year = static_cast<int>(*year);
        r.month = static_cast<int>(*month);
        r.value = *value;

        auto [it, inserted] = merged.try_emplace(key_of(r), r, line_no);
        if (!inserted) {
            it->second.first.value += r.value;
            out.warnings.push_back("duplicate key " + r.reporter + "," + r.partner + "," + flow_code(r.flow) + "," +
                                   r.hs2 + "," + std::to_string(r.year) + "," + std::to_string(r.month) + " on line " +
                                   std::to_string(line_no) + " summed with line " + std::to_string(it->second.second));
        }
    }
    out.records.reserve(merged.size());
    for (auto& [k, v] : merged) out.records.push_back(std::move(v.first));
    return out;
}

void write_trades(const std::vector<TradeRecord>& records, const std::filesystem::path& path) {
    std::ostringstream out;
    out << kTradeHeader << '\n';
    for (const auto& r : records)
        out << r.reporter << ',' << r.partner << ',' << flow_code(r.flow) << ',' << r.hs2 << ',' << r.year << ','
            << r.month << ',' << io::format_double(r.value) << '\n';
    io::write_file_atomic(path, out.str());
}

SectorMap::SectorMap(std::map<std::string, std::string> chapters) : chapters_(std::move(chapters)) {
    for (const auto& [hs2, sector] : chapters_) {
        if (!valid_chapter(hs2)) throw InvalidInput("sector map: bad chapter code '" + hs2 + "'");
        if (sector.empty()) throw InvalidInput("sector map: chapter " + hs2 + " has an empty sector name");
    }
}

const std::vector<std::string>& default_sector_names() {
    static const std::vector<std::string> names = {"agriculture", "apparel",  "chemicals", "materials",    "machinery",
                                                   "metals",      "minerals", "transport", "miscellaneous"};
    return names;
}

SectorMap SectorMap::default_map() {
    std::map<std::string, std::string> m;
    for (int ch = 1; ch <= 97; ++ch) {
        std::string sector = "miscellaneous";
        if (ch <= 24) sector = "agriculture";
        else if (ch <= 27) sector = "minerals";
        else if (ch <= 38) sector = "chemicals";
        else if (ch <= 49) sector = "materials";
        else if (ch <= 67) sector = "apparel";
        else if (ch <= 70) sector = "materials";
        else if (ch >= 72 && ch <= 83) sector = "metals";
        else if (ch == 84 || ch == 85) sector = "machinery";
        else if (ch >= 86 && ch <= 89) sector = "transport";
        m[chapter_code(ch)] = sector;
    }
    return SectorMap(std::move(m));
}

SectorMap SectorMap::load(const std::filesystem::path& path) {
    const auto file = path.string();
    auto lines = io::read_lines(path);
    expect_header(lines, file, kSectorMapHeader);
    std::map<std::string, std::string> m;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (io::trim(lines[ln]).empty()) continue;
        auto cells = io::split(lines[ln]);
        if (cells.size() != 2) throw ParseError(file, ln + 1, 0, "malformed row: expected 'hs2,sector'");
        auto hs2 = io::trim(cells[0]);
        auto sector = io::trim(cells[1]);
        if (!valid_chapter(hs2)) throw ParseError(file, ln + 1, 1, "bad chapter code '" + hs2 + "'");
        if (sector.empty()) throw ParseError(file, ln + 1, 2, "empty sector name");
        if (!m.emplace(hs2, sector).second) throw ParseError(file, ln + 1, 1, "chapter " + hs2 + " mapped twice");
    }
    return SectorMap(std::move(m));
}

void SectorMap::write(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << kSectorMapHeader << '\n';
    for (const auto& [hs2, sector] : chapters_) out << hs2 << ',' << sector << '\n';
    io::write_file_atomic(path, out.str());
}

std::optional<std::string> SectorMap::lookup(const std::string& hs2) const {
    auto it = chapters_.find(hs2);
    if (it == chapters_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> SectorMap::sector_names() const {
    std::set<std::string> names;
    for (const auto& [hs2, sector] : chapters_) names.insert(sector);
    return {names.begin(), names.end()};
}

std::vector<SectorRecord> apply_sector_map(const std::vector<TradeRecord>& records, const SectorMap& map) {
    std::set<std::string> missing;
    for (const auto& r : records)
        if (!map.lookup(r.hs2)) missing.insert(r.hs2);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw InvalidInput("sector map does not cover chapters: " + list);
    }

    // Sum in a canonical order so that the input order cannot change a single bit.
    std::vector<const TradeRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const TradeRecord* a, const TradeRecord* b) {
        const auto ka = key_of(*a);
        const auto kb = key_of(*b);
        if (ka != kb) return ka < kb;
        return a->value < b->value;
    });

    using Key = std::tuple<std::string, std::string, Flow, std::string, int, int>;
    std::map<Key, double> sums;
    for (const auto* r : sorted) sums[{r->reporter, r->partner, r->flow, *map.lookup(r->hs2), r->year, r->month}] += r->value;

    std::vector<SectorRecord> out;
    out.reserve(sums.size());
    for (const auto& [k, v] : sums)
        out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k), std::get<5>(k), v});
    return out;
}

Controls load_controls(const std::filesystem::path& path) {
    const auto file = path.string();
    auto lines = io::read_lines(path);
    expect_header(lines, file, kControlsHeader);
    Controls out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (io::trim(lines[ln]).empty()) continue;
        auto cells = io::split(lines[ln]);
        if (cells.size() != 7) throw ParseError(file, ln + 1, 0, "malformed row: expected 7 cells");
        auto country = io::trim(cells[0]);
        if (country.empty()) throw ParseError(file, ln + 1, 1, "empty country");
        auto year = io::parse_int(cells[1]);
        if (!year) throw ParseError(file, ln + 1, 2, "non-numeric year '" + cells[1] + "'");
        std::array<double, 5> v{};
        for (std::size_t k = 0; k < 5; ++k) {
            auto x = io::parse_double(cells[k + 2]);
            if (!x || !std::isfinite(*x)) throw ParseError(file, ln + 1, k + 3, "non-numeric control '" + cells[k + 2] + "'");
            v[k] = *x;
        }
        if (!out.emplace(std::make_pair(country, static_cast<int>(*year)), ControlRow{v[0], v[1], v[2], v[3], v[4]}).second)
            throw ParseError(file, ln + 1, 0, "duplicate controls for (" + country + ", " + std::to_string(*year) + ")");
    }
    return out;
}

void write_controls(const Controls& controls, const std::filesystem::path& path) {
    std::ostringstream out;
    out << kControlsHeader << '\n';
    for (const auto& [key, c] : controls)
        out << key.first << ',' << key.second << ',' << io::format_double(c.pop_growth) << ','
            << io::format_double(c.gdp_pc_growth) << ',' << io::format_double(c.geo_dist) << ','
            << io::format_double(c.socio_cond) << ',' << io::format_double(c.invest_profile) << '\n';
    io::write_file_atomic(path, out.str());
}

Denominator parse_denominator(const std::string& text) {
    if (text == "included") return Denominator::Included;
    if (text == "world") return Denominator::World;
    throw InvalidInput("denominator must be 'included' or 'world', got '" + text + "'");
}

const char* denominator_name(Denominator d) { return d == Denominator::Included ? "included" : "world"; }

std::string Panel::content_hash() const {
    std::ostringstream s;
    s << reporter << ',' << flow_code(flow) << ',' << denominator_name(denominator) << '\n';
    for (const auto& r : rows)
        s << r.sector << ',' << r.partner << ',' << r.t << ',' << io::format_double(r.share) << ','
          << io::format_double(r.pop_growth_lag) << ',' << io::format_double(r.gdp_pc_growth_lag) << ','
          << io::format_double(r.geo_dist) << ',' << io::format_double(r.socio_cond) << ','
          << io::format_double(r.invest_profile) << ',' << r.imputed << '\n';
    return io::sha256_hex(s.str());
}

Panel build_panel(const std::vector<SectorRecord>& records, const Controls& controls, const std::string& reporter,
                  Flow flow, const PanelOptions& options) {
    Panel p;
    p.reporter = reporter;
    p.flow = flow;
    p.denominator = options.denominator;

    std::set<std::string> partners, sectors;
    std::map<std::tuple<std::string, std::string, int>, double> values;  // (sector, partner, t)
    std::map<std::pair<std::string, int>, double> world;                 // (sector, t)
    bool any = false;
    for (const auto& r : records) {
        if (r.reporter != reporter || r.flow != flow) continue;
        const int t = month_index(r.year, r.month);
        if (!any) p.first_t = p.last_t = t;
        any = true;
        p.first_t = std::min(p.first_t, t);
        p.last_t = std::max(p.last_t, t);
        sectors.insert(r.sector);
        if (r.partner == kWorldPartner) {
            world[{r.sector, t}] += r.value;
        } else {
            partners.insert(r.partner);
            values[{r.sector, r.partner, t}] += r.value;
        }
    }
    if (!any) throw InvalidInput(std::string("no trade records for reporter ") + reporter + " flow " + flow_code(flow));
    if (!options.partners.empty()) partners = std::set<std::string>(options.partners.begin(), options.partners.end());
    partners.erase(reporter);
    if (partners.empty()) throw InvalidInput("panel has no partners");
    if (options.denominator == Denominator::World && world.empty())
        throw InvalidInput("denominator 'world' requires partner " + kWorldPartner + " rows");
    p.partners.assign(partners.begin(), partners.end());
    p.sectors.assign(sectors.begin(), sectors.end());

    // Growth controls enter lagged one year, the indices contemporaneously.
    std::vector<std::string> gaps;
    for (const auto& partner : p.partners)
        for (int y = month_year(p.first_t) - 1; y <= month_year(p.last_t); ++y) {
            const bool needed_lag = y < month_year(p.last_t);
            const bool needed_now = y >= month_year(p.first_t);
            if ((needed_lag || needed_now) && !controls.count({partner, y}))
                gaps.push_back("(" + partner + ", " + std::to_string(y) + ")");
        }
    if (!gaps.empty()) {
        std::string list;
        for (const auto& g : gaps) list += (list.empty() ? "" : ", ") + g;
        throw InvalidInput("controls missing for " + list);
    }

    p.rows.reserve(p.sectors.size() * p.partners.size() * static_cast<std::size_t>(p.last_t - p.first_t + 1));
    for (const auto& sector : p.sectors) {
        std::vector<double> denom(static_cast<std::size_t>(p.last_t - p.first_t + 1), 0.0);
        for (int t = p.first_t; t <= p.last_t; ++t) {
            double d = 0.0;
            if (options.denominator == Denominator::Included) {
                for (const auto& partner : p.partners) {
                    auto it = values.find({sector, partner, t});
                    if (it != values.end()) d += it->second;
                }
            } else {
                auto it = world.find({sector, t});
                if (it != world.end()) d = it->second;
            }
            denom[static_cast<std::size_t>(t - p.first_t)] = d;
            if (!(d > 0.0)) ++p.zero_denominator_cells;
        }
        for (const auto& partner : p.partners) {
            for (int t = p.first_t; t <= p.last_t; ++t) {
                PanelObservation o;
                o.partner = partner;
                o.sector = sector;
                o.t = t;
                const double d = denom[static_cast<std::size_t>(t - p.first_t)];
                auto it = values.find({sector, partner, t});
                if (it == values.end()) {
                    o.imputed = true;
                    ++p.imputed_zeros;
                } else if (d > 0.0) {
                    o.share = 100.0 * it->second / d;
                }
                const int y = month_year(t);
                const auto& lag = controls.at({partner, y - 1});
                const auto& now = controls.at({partner, y});
                o.pop_growth_lag = lag.pop_growth;
                o.gdp_pc_growth_lag = lag.gdp_pc_growth;
                o.geo_dist = now.geo_dist;
                o.socio_cond = now.socio_cond;
                o.invest_profile = now.invest_profile;
                p.rows.push_back(std::move(o));
            }
        }
    }
    return p;
}

Panel build_panel(const std::vector<SectorRecord>& records, const std::filesystem::path& controls_path,
                  const std::string& reporter, Flow flow, const PanelOptions& options) {
    return build_panel(records, load_controls(controls_path), reporter, flow, options);
}

DeviationSeries deviation_series(const std::vector<TradeRecord>& records, const std::string& reporter, Flow flow,
                                 Granularity granularity) {
    std::map<int, double> totals;
    int last = -1;
    for (const auto& r : records) {
        if (r.reporter != reporter || r.flow != flow || r.partner == kWorldPartner) continue;
        const int t = month_index(r.year, r.month);
        if (t < 0) continue;
        totals[t] += r.value;
        last = std::max(last, t);
    }
    if (last < 0 || totals.begin()->first > 23)
        throw InvalidInput(std::string("deviation_series: no 2016-2017 baseline data for ") + reporter + " " + flow_code(flow));
    last = std::max(last, 23);
    auto value_at = [&](int t) {
        auto it = totals.find(t);
        return it == totals.end() ? 0.0 : it->second;
    };

    std::array<double, 12> baseline{};
    for (int m = 0; m < 12; ++m) baseline[static_cast<std::size_t>(m)] = (value_at(m) + value_at(m + 12)) / 2.0;

    DeviationSeries out;
    out.reporter = reporter;
    out.flow = flow;
    out.granularity = granularity;
    std::vector<DeviationPoint> monthly;
    for (int t = 0; t <= last; ++t) {
        const double base = baseline[static_cast<std::size_t>(t % 12)];
        DeviationPoint pt;
        pt.period = month_label(t);
        if (base > 0.0) {
            pt.deviation = value_at(t) / base - 1.0;
        } else {
            pt.deviation = std::numeric_limits<double>::quiet_NaN();
            pt.defined = false;
        }
        monthly.push_back(pt);
    }
    if (granularity == Granularity::Month) {
        out.points = std::move(monthly);
        return out;
    }
    for (int q0 = 0; q0 <= last; q0 += 3) {
        DeviationPoint pt;
        pt.period = std::to_string(month_year(q0)) + "-Q" + std::to_string((month_of_year(q0) - 1) / 3 + 1);
        double sum = 0.0;
        int count = 0;
        for (int t = q0; t < q0 + 3 && t <= last; ++t) {
            const auto& m = monthly[static_cast<std::size_t>(t)];
            if (!m.defined) pt.defined = false;
            sum += m.deviation;
            ++count;
        }
        pt.deviation = pt.defined ? sum / count : std::numeric_limits<double>::quiet_NaN();
        out.points.push_back(pt);
    }
    return out;
}

std::string representative_chapter(const std::string& sector) {
    static const SectorMap map = SectorMap::default_map();
    for (const auto& [hs2, name] : map.chapters())
        if (name == sector) return hs2;
    throw InvalidInput("no default HS chapter for sector '" + sector + "'");
}

SynthPanel synth_panel(const SynthPanelSpec& spec) {
    if (spec.partners.size() < 2) throw InvalidInput("synth_panel: at least two partners required");
    if (spec.sectors.empty()) throw InvalidInput("synth_panel: at least one sector required");
    if (spec.months < 1) throw InvalidInput("synth_panel: months must be positive");
    if (!(spec.noise_sd >= 0.0)) throw InvalidInput("synth_panel: noise_sd must be non-negative");
    if (std::set<std::string>(spec.partners.begin(), spec.partners.end()).size() != spec.partners.size())
        throw InvalidInput("synth_panel: duplicate partner codes");
    for (const auto& e : spec.effects) {
        if (std::find(spec.partners.begin(), spec.partners.end(), e.partner) == spec.partners.end())
            throw InvalidInput("synth_panel: effect partner '" + e.partner + "' is not a partner");
        if (std::find(spec.sectors.begin(), spec.sectors.end(), e.sector) == spec.sectors.end())
            throw InvalidInput("synth_panel: effect sector '" + e.sector + "' is not a sector");
    }

    detail::Rng rng(spec.seed);
    SynthPanel out;
    out.spec = spec;
    const std::size_t P = spec.partners.size();
    const int last_year = month_year(spec.months - 1);

    // Controls first, so that the effect configuration never shifts the control paths.
    for (const auto& partner : spec.partners) {
        struct Path {
            double level, slope, phase;
        };
        std::array<Path, 5> paths{};
        const std::array<std::pair<double, double>, 5> levels = {
            std::pair{0.0, 2.0}, {1.0, 5.0}, {0.5, 3.0}, {1.0, 4.0}, {1.0, 4.0}};
        for (std::size_t k = 0; k < 5; ++k)
            paths[k] = {rng.uniform(levels[k].first, levels[k].second), rng.uniform(-0.1, 0.1),
                        rng.uniform(0.0, 2.0 * std::numbers::pi)};
        for (int y = kBaseYear - 1; y <= last_year; ++y) {
            std::array<double, 5> v{};
            for (std::size_t k = 0; k < 5; ++k)
                v[k] = paths[k].level + paths[k].slope * (y - kBaseYear) +
                       spec.control_wiggle * std::sin(paths[k].phase + 0.9 * (y - kBaseYear));
            out.controls[{partner, y}] = ControlRow{v[0], v[1], v[2], v[3], v[4]};
        }
    }

    for (const auto& sector : spec.sectors) {
        std::vector<double> base(P);
        double total = 0.0;
        for (auto& b : base) total += (b = rng.uniform(0.5, 1.5));
        for (std::size_t i = 0; i < P; ++i) {
            base[i] *= 100.0 / total;
            out.baseline_shares[{sector, spec.partners[i]}] = base[i];
        }
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const std::string hs2 = representative_chapter(sector);

        for (int t = 0; t < spec.months; ++t) {
            std::vector<double> share = base;
            std::vector<bool> treated(P, false);
            double treated_before = 0.0, treated_after = 0.0;
            for (const auto& e : spec.effects) {
                if (e.sector != sector || t < e.start_t) continue;
                const auto i = static_cast<std::size_t>(
                    std::find(spec.partners.begin(), spec.partners.end(), e.partner) - spec.partners.begin());
                if (!treated[i]) treated_before += base[i];
                treated[i] = true;
                share[i] += e.magnitude;
                treated_after += e.magnitude;
            }
            treated_after += treated_before;
            if (treated_after != treated_before) {
                const double rest = 100.0 - treated_before;
                const double scale = rest > 0.0 ? (100.0 - treated_after) / rest : 0.0;
                bool bad = scale < 0.0 || (rest <= 0.0 && treated_after != 100.0);
                for (std::size_t i = 0; i < P; ++i) {
                    if (!treated[i]) share[i] *= scale;
                    if (share[i] < 0.0 || share[i] > 100.0) bad = true;
                }
                if (bad)
                    throw InvalidInput("synth_panel: planted effects push shares outside [0, 100] in sector " + sector);
            }

            std::vector<double> eps(P);
            double mean = 0.0;
            for (auto& e : eps) mean += (e = spec.noise_sd * rng.normal());
            mean /= static_cast<double>(P);
            bool clipped = false;
            for (std::size_t i = 0; i < P; ++i) {
                share[i] += eps[i] - mean;
                if (share[i] < 0.0) {
                    share[i] = 0.0;
                    clipped = true;
                }
            }
            if (clipped) {
                ++out.clipped_cells;
                double sum = 0.0;
                for (double s : share) sum += s;
                for (double& s : share) s *= 100.0 / sum;
            }

            const int month = t % 12 + 1;
            const double level = spec.sector_trade_level *
                                 (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * (month - 1) / 12.0 + phase)) *
                                 (1.0 + 0.005 * t);
            for (std::size_t i = 0; i < P; ++i) {
                const double value = share[i] * level / 100.0;
                out.true_shares[{sector, spec.partners[i], t}] = share[i];
                out.records.push_back({spec.reporter, spec.partners[i], spec.flow, hs2, month_year(t), month, value});
            }
        }
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const TradeRecord& a, const TradeRecord& b) { return key_of(a) < key_of(b); });
    return out;
}

std::string ground_truth_text(const SynthPanelSpec& spec) {
    std::ostringstream s;
    auto join = [](const std::vector<std::string>& v) {
        std::string out;
        for (const auto& x : v) out += (out.empty() ? "" : "|") + x;
        return out;
    };
    s << "generator = synth_panel\n"
      << "version = 1\n"
      << "seed = " << spec.seed << '\n'
      << "reporter = " << spec.reporter << '\n'
      << "flow = " << flow_code(spec.flow) << '\n'
      << "months = " << spec.months << '\n'
      << "noise_sd = " << io::format_double(spec.noise_sd) << '\n'
      << "control_wiggle = " << io::format_double(spec.control_wiggle) << '\n'
      << "sector_trade_level = " << io::format_double(spec.sector_trade_level) << '\n'
      << "partners = " << join(spec.partners) << '\n'
      << "sectors = " << join(spec.sectors) << '\n';
    for (const auto& e : spec.effects)
        s << "effect = " << e.partner << '|' << e.sector << '|' << month_label(e.start_t) << '|'
          << io::format_double(e.magnitude) << '\n';
    return s.str();
}

SynthPanelSpec parse_ground_truth(const std::string& text) {
    SynthPanelSpec spec;
    std::istringstream in(text);
    std::string line;
    auto number = [](const std::string& key, const std::string& v) {
        auto d = io::parse_double(v);
        if (!d) throw InvalidInput("ground truth: bad number for " + key + ": '" + v + "'");
        return *d;
    };
    while (std::getline(in, line)) {
        auto l = io::trim(line);
        if (l.empty() || l[0] == '#') continue;
        auto eq = l.find('=');
        if (eq == std::string::npos) throw InvalidInput("ground truth: expected key = value, got '" + l + "'");
        auto key = io::trim(l.substr(0, eq));
        auto value = io::trim(l.substr(eq + 1));
        if (key == "seed") {
            auto v = io::parse_int(value);
            if (!v || *v < 0) throw InvalidInput("ground truth: bad seed '" + value + "'");
            spec.seed = static_cast<std::uint64_t>(*v);
        } else if (key == "reporter") {
            spec.reporter = value;
        } else if (key == "flow") {
            spec.flow = parse_flow(value);
        } else if (key == "months") {
            spec.months = static_cast<int>(number(key, value));
        } else if (key == "noise_sd") {
            spec.noise_sd = number(key, value);
        } else if (key == "control_wiggle") {
            spec.control_wiggle = number(key, value);
        } else if (key == "sector_trade_level") {
            spec.sector_trade_level = number(key, value);
        } else if (key == "partners") {
            spec.partners = io::split(value, '|');
        } else if (key == "sectors") {
            spec.sectors = io::split(value, '|');
        } else if (key == "effect") {
            auto parts = io::split(value, '|');
            if (parts.size() != 4) throw InvalidInput("ground truth: effect needs partner|sector|YYYY-MM|magnitude");
            spec.effects.push_back({parts[0], parts[1], parse_month_label(parts[2]), number(key, parts[3])});
        } else if (key != "generator" && key != "version") {
            throw InvalidInput("ground truth: unknown key '" + key + "'");
        }
    }
    return spec;
}

}  // namespace gvckit
