#include "gvckit/decomp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <thread>

#include "gvckit/error.hpp"
#include "gvckit/io.hpp"

namespace gvckit {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

struct PairIndex {
    std::size_t s;
    std::size_t r;
};

PairIndex resolve_pair(const MrioTable& table, const std::string& exporter, const std::string& importer) {
    if (exporter == importer) throw InvalidInput("exporter and importer must differ (got '" + exporter + "' twice)");
    return {table.country_index(exporter), table.country_index(importer)};
}

VectorXd demand(const MrioTable& t, std::size_t origin, std::size_t dest) {
    const auto n = static_cast<Index>(t.num_sectors());
    return t.final_demand.block(static_cast<Index>(origin) * n, static_cast<Index>(dest), n, 1);
}

VectorXd segment(const VectorXd& v, std::size_t country, std::size_t n) {
    return v.segment(static_cast<Index>(country * n), static_cast<Index>(n));
}

// Row V^t B^{ts} as a column vector over the exporter's sectors.
VectorXd content_row(const CoefMatrices& c, std::size_t t, std::size_t s, std::size_t n) {
    return c.origin_content.row(static_cast<Index>(t)).segment(static_cast<Index>(s * n), static_cast<Index>(n)).transpose();
}

DecompGroups decompose_indices(const MrioTable& t, const CoefMatrices& c, std::size_t s, std::size_t r) {
    const auto G = t.num_countries();
    const auto N = t.num_sectors();

    DecompGroups out;
    out.exporter = t.countries[s];
    out.importer = t.countries[r];
    out.year = t.year;
    out.sectors = t.sectors;

    const auto a_sr = block(c.input_coef, s, r, N);
    const auto& l_ss = c.local[s];
    const auto& l_rr = c.local[r];
    const VectorXd x_r = segment(t.output, r, N);
    const VectorXd y_sr = demand(t, s, r);
    const VectorXd y_rr = demand(t, r, r);

    out.exports = a_sr * x_r + y_sr;

    // Domestic value-added multipliers of the exporter.
    const VectorXd vb_ss = content_row(c, s, s, N);
    const VectorXd vl_ss = (c.va_coef.segment(static_cast<Index>(s * N), static_cast<Index>(N)) * l_ss).transpose();

    // Demand destinations of the importer's output, split by where it is finally absorbed.
    const VectorXd absorbed_by_r = block(c.leontief, r, r, N) * y_rr;

    VectorXd third = VectorXd::Zero(static_cast<Index>(N));
    VectorXd returned = block(c.leontief, r, r, N) * demand(t, r, s);
    VectorXd r_to_third = VectorXd::Zero(static_cast<Index>(N));
    for (std::size_t k = 0; k < G; ++k) {
        if (k == s || k == r) continue;
        const auto b_rk = block(c.leontief, r, k, N);
        third += b_rk * demand(t, k, k);
        r_to_third += demand(t, r, k);
        VectorXd onward = VectorXd::Zero(static_cast<Index>(N));
        for (std::size_t u = 0; u < G; ++u) {
            if (u == s || u == k) continue;
            onward += demand(t, k, u);
        }
        third += b_rk * onward;
        returned += b_rk * demand(t, k, s);
    }
    third += block(c.leontief, r, r, N) * r_to_third;
    returned += block(c.leontief, r, s, N) * demand(t, s, s);

    VectorXd s_final_abroad = VectorXd::Zero(static_cast<Index>(N));
    for (std::size_t u = 0; u < G; ++u)
        if (u != s) s_final_abroad += demand(t, s, u);
    const VectorXd double_counted = block(c.leontief, r, s, N) * s_final_abroad;

    const VectorXd ax = a_sr * x_r;
    auto& g = out.groups;
    g[0] = vb_ss.cwiseProduct(y_sr);
    g[1] = vl_ss.cwiseProduct(a_sr * absorbed_by_r);
    g[2] = vl_ss.cwiseProduct(a_sr * third);
    g[3] = vl_ss.cwiseProduct(a_sr * returned);
    g[4] = vl_ss.cwiseProduct(a_sr * double_counted) + (vb_ss - vl_ss).cwiseProduct(ax);

    // Foreign content: the importer's own value added and everyone else's.
    const VectorXd vb_rs = content_row(c, r, s, N);
    VectorXd vb_third = VectorXd::Zero(static_cast<Index>(N));
    for (std::size_t k = 0; k < G; ++k)
        if (k != s && k != r) vb_third += content_row(c, k, s, N);
    const VectorXd l_rr_y_rr = l_rr * y_rr;
    const VectorXd direct = y_sr + a_sr * l_rr_y_rr;
    g[5] = vb_rs.cwiseProduct(direct);
    g[6] = vb_third.cwiseProduct(direct);
    g[7] = (vb_rs + vb_third).cwiseProduct(a_sr * (x_r - l_rr_y_rr));
    return out;
}

std::string alpha_prefix(const std::string& code, long* number) {
    std::size_t k = code.size();
    while (k > 0 && std::isdigit(static_cast<unsigned char>(code[k - 1]))) --k;
    if (k == code.size()) return {};
    auto parsed = io::parse_int(code.substr(k));
    if (!parsed) return {};
    *number = *parsed;
    return code.substr(0, k);
}

}  // namespace

const std::array<std::string, kNumGroups>& group_labels() {
    static const std::array<std::string, kNumGroups> labels = {
        "Domestic value added of final exports",
        "Domestic value added of intermediate exports absorbed by direct importers",
        "Domestic value added of intermediate exports re-exported to third countries",
        "Domestic value added returned to the exporting country via re-imports",
        "Double counted domestic value added",
        "Direct importer's value added embedded",
        "Third-country value added implicitly in domestic exports",
        "Foreign value-added double-counting terms",
    };
    return labels;
}

Eigen::VectorXd DecompGroups::total() const {
    VectorXd sum = groups[0];
    for (std::size_t k = 1; k < kNumGroups; ++k) sum += groups[k];
    return sum;
}

Eigen::VectorXd DecompGroups::domestic_content() const {
    return groups[0] + groups[1] + groups[2] + groups[3] + groups[4];
}

Eigen::VectorXd DecompGroups::foreign_content() const { return groups[5] + groups[6] + groups[7]; }

Eigen::VectorXd gross_exports(const MrioTable& table, const CoefMatrices& coef, const std::string& exporter,
                              const std::string& importer) {
    const auto [s, r] = resolve_pair(table, exporter, importer);
    const auto N = table.num_sectors();
    return block(coef.input_coef, s, r, N) * segment(table.output, r, N) + demand(table, s, r);
}

DecompGroups decompose(const MrioTable& table, const CoefMatrices& coef, const std::string& exporter,
                       const std::string& importer) {
    const auto [s, r] = resolve_pair(table, exporter, importer);
    return decompose_indices(table, coef, s, r);
}

std::vector<DecompGroups> decompose_all(const MrioTable& table, const CoefMatrices& coef, unsigned threads) {
    const auto G = table.num_countries();
    std::vector<std::size_t> order(G);
    for (std::size_t k = 0; k < G; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return table.countries[a] < table.countries[b]; });

    std::vector<PairIndex> pairs;
    pairs.reserve(G * (G - 1));
    for (auto s : order)
        for (auto r : order)
            if (s != r) pairs.push_back({s, r});

    std::vector<DecompGroups> out(pairs.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, pairs.size())));
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t k = begin; k < pairs.size(); k += step)
            out[k] = decompose_indices(table, coef, pairs[k].s, pairs[k].r);
    };
    if (threads <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    }
    return out;
}

GvcIndices indices(const DecompGroups& groups, const std::vector<std::string>& sector_subset) {
    if (sector_subset.empty()) throw InvalidInput("indices: empty sector subset");
    GvcIndices idx;
    idx.sector_subset = sector_subset;
    double exports = 0.0, forward = 0.0, backward = 0.0;
    std::set<std::string> seen;
    for (const auto& code : sector_subset) {
        auto it = std::find(groups.sectors.begin(), groups.sectors.end(), code);
        if (it == groups.sectors.end()) throw InvalidInput("indices: unknown sector '" + code + "'");
        if (!seen.insert(code).second) throw InvalidInput("indices: sector '" + code + "' listed twice");
        const auto i = static_cast<Index>(it - groups.sectors.begin());
        exports += groups.exports(i);
        forward += groups.groups[2](i) + groups.groups[3](i);
        backward += groups.groups[5](i) + groups.groups[6](i);
    }
    if (!(exports > 0.0)) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        idx.forward_share = idx.backward_share = idx.participation = idx.position = nan;
        idx.defined = false;
        return idx;
    }
    idx.forward_share = forward / exports;
    idx.backward_share = backward / exports;
    idx.participation = idx.forward_share + idx.backward_share;
    idx.position = std::log1p(idx.forward_share) - std::log1p(idx.backward_share);
    idx.defined = true;
    return idx;
}

std::vector<YearIndices> indices_series(const std::vector<MrioTable>& tables, const std::string& exporter,
                                        const std::string& importer, const std::vector<std::string>& sector_subset) {
    if (tables.empty()) throw InvalidInput("indices_series: no tables");
    std::vector<const MrioTable*> sorted;
    for (const auto& t : tables) {
        if (t.countries != tables.front().countries || t.sectors != tables.front().sectors)
            throw InvalidInput("indices_series: year " + std::to_string(t.year) +
                               " has country or sector lists inconsistent with year " +
                               std::to_string(tables.front().year));
        sorted.push_back(&t);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->year < b->year; });
    for (std::size_t k = 1; k < sorted.size(); ++k)
        if (sorted[k]->year == sorted[k - 1]->year)
            throw InvalidInput("indices_series: year " + std::to_string(sorted[k]->year) + " appears twice");

    std::vector<YearIndices> out;
    for (const auto* t : sorted) {
        const auto coef = coefficients(*t);
        out.push_back({t->year, indices(decompose(*t, coef, exporter, importer), sector_subset)});
    }
    return out;
}

SectorGroup parse_sector_group(const std::string& text, const std::vector<std::string>& sectors) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw InvalidInput("sector group '" + text + "' must look like name:SPEC");
    SectorGroup group;
    group.name = io::trim(text.substr(0, colon));
    const auto body = io::trim(text.substr(colon + 1));
    if (body == "*") {
        group.sectors = sectors;
    } else if (auto dots = body.find(".."); dots != std::string::npos) {
        long lo = 0, hi = 0;
        const auto p_lo = alpha_prefix(body.substr(0, dots), &lo);
        const auto p_hi = alpha_prefix(body.substr(dots + 2), &hi);
        if (p_lo.empty() || p_lo != p_hi || lo > hi) throw InvalidInput("bad sector range '" + body + "'");
        for (const auto& code : sectors) {
            long num = 0;
            if (alpha_prefix(code, &num) == p_lo && num >= lo && num <= hi) group.sectors.push_back(code);
        }
    } else {
        for (const auto& code : io::split(body, '|')) {
            auto c = io::trim(code);
            if (std::find(sectors.begin(), sectors.end(), c) == sectors.end())
                throw InvalidInput("sector group '" + group.name + "': unknown sector '" + c + "'");
            group.sectors.push_back(c);
        }
    }
    if (group.sectors.empty()) throw InvalidInput("sector group '" + group.name + "' matches no sectors");
    return group;
}

void write_decomp_header(std::ostream& out) {
    out << "year,exporter,importer,sector,E,G1,G2,G3,G4,G5,G6,G7,G8\n";
}

void write_decomp_rows(std::ostream& out, const DecompGroups& g) {
    for (std::size_t i = 0; i < g.sectors.size(); ++i) {
        const auto k = static_cast<Index>(i);
        out << g.year << ',' << g.exporter << ',' << g.importer << ',' << g.sectors[i] << ','
            << io::format_double(g.exports(k));
        for (const auto& grp : g.groups) out << ',' << io::format_double(grp(k));
        out << '\n';
    }
}

void write_indices_header(std::ostream& out) {
    out << "year,exporter,importer,sector_group,forward_share,backward_share,participation,position,defined\n";
}

void write_indices_row(std::ostream& out, int year, const std::string& exporter, const std::string& importer,
                       const std::string& sector_group, const GvcIndices& idx) {
    out << year << ',' << exporter << ',' << importer << ',' << sector_group << ',';
    if (idx.defined) {
        out << io::format_double(idx.forward_share) << ',' << io::format_double(idx.backward_share) << ','
            << io::format_double(idx.participation) << ',' << io::format_double(idx.position) << ",true\n";
    } else {
        out << ",,,,false\n";
    }
}

}  // namespace gvckit
