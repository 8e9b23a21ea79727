#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gvckit/decomp.hpp"
#include "gvckit/event_study.hpp"
#include "gvckit/mrio.hpp"
#include "gvckit/trade.hpp"

namespace fixtures {

inline gvckit::SynthMrioSpec world_spec(std::size_t g, std::size_t n, std::uint64_t seed) {
    gvckit::SynthMrioSpec s;
    s.countries = g;
    s.sectors = n;
    s.seed = seed;
    return s;
}

// The seeded worlds used by the conservation suites: G cycles {2,3,5}, N cycles {1,2,4}.
inline gvckit::SynthMrioSpec suite_world(std::uint64_t k) {
    static const std::array<std::size_t, 3> gs{2, 3, 5}, ns{1, 2, 4};
    return world_spec(gs[k % 3], ns[(k / 3) % 3], 1000 + k);
}

// Truncated power series sum_{k<=terms} A^k.
inline Eigen::MatrixXd power_series(const Eigen::MatrixXd& a, int terms = 200) {
    const auto n = a.rows();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = sum;
    for (int k = 1; k <= terms; ++k) {
        term = term * a;
        sum += term;
    }
    return sum;
}

// Domestic and foreign origin content of E computed straight from V and B.
struct OriginSplit {
    Eigen::VectorXd domestic;
    Eigen::VectorXd foreign;
};

inline OriginSplit origin_split(const gvckit::MrioTable& table, const gvckit::CoefMatrices& coef,
                                const gvckit::DecompGroups& d) {
    const auto n = table.num_sectors();
    const auto s = table.country_index(d.exporter);
    OriginSplit out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
    for (std::size_t t = 0; t < table.num_countries(); ++t) {
        const Eigen::RowVectorXd vt = coef.va_coef.segment(static_cast<Eigen::Index>(t * n), static_cast<Eigen::Index>(n));
        const Eigen::RowVectorXd content = vt * gvckit::block(coef.leontief, t, s, n);
        Eigen::VectorXd part = content.transpose().cwiseProduct(d.exports);
        (t == s ? out.domestic : out.foreign) += part;
    }
    return out;
}

inline double rel_l1(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& scale) {
    const double denom = scale.lpNorm<1>();
    const double diff = (a - b).lpNorm<1>();
    return denom > 0.0 ? diff / denom : diff;
}

inline gvckit::MrioTable rescaled(gvckit::MrioTable t, double factor) {
    t.intermediate *= factor;
    t.final_demand *= factor;
    t.value_added *= factor;
    t.output *= factor;
    return t;
}

// Synthetic panel run through the regular ingestion path (records -> sectors -> shares).
inline gvckit::Panel panel_from(const gvckit::SynthPanel& synth,
                                gvckit::Denominator denominator = gvckit::Denominator::Included) {
    auto sectors = gvckit::apply_sector_map(synth.records, gvckit::SectorMap::default_map());
    gvckit::PanelOptions opt;
    opt.denominator = denominator;
    return gvckit::build_panel(sectors, synth.controls, synth.spec.reporter, synth.spec.flow, opt);
}

// Replaces every control row by the partner's 2016 row, leaving the trade records untouched.
inline void flatten_controls(gvckit::SynthPanel& synth) {
    for (auto& [key, row] : synth.controls) row = synth.controls.at({key.first, 2016});
}

inline std::vector<std::string> partner_codes(std::size_t p) {
    static const std::vector<std::string> pool = {
        "ARG", "AUS", "BRA", "CAN", "DEU", "FRA", "GBR", "IDN", "IND", "ITA", "JPN", "KOR", "MEX", "MYS",
        "NLD", "PHL", "SGP", "THA", "TUR", "VNM", "ZAF", "CHE", "ESP", "POL", "SWE"};
    std::vector<std::string> out(pool.begin(), pool.begin() + static_cast<long>(p));
    std::sort(out.begin(), out.end());
    return out;
}

// Panel whose shares follow the regression model exactly:
//   share = theta_i + beta Post + gamma Treat*Post + lambda . controls (+ optional iid noise).
struct ModelPanel {
    gvckit::Panel panel;
    std::string focal;
    std::string sector;
};

inline ModelPanel model_panel(std::size_t partners, double gamma, std::uint64_t seed, double noise_sd = 0.0,
                              const gvckit::EventWindow& window = gvckit::builtin_window("A")) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    ModelPanel m;
    m.sector = "machinery";
    auto& p = m.panel;
    p.reporter = "CHN";
    p.partners = partner_codes(partners);
    m.focal = p.partners[partners / 2];
    p.sectors = {m.sector};
    p.first_t = 0;
    p.last_t = 95;
    const double beta = 0.7;
    const std::array<double, 5> lambda{0.4, -0.25, 0.1, 0.6, -0.35};
    for (const auto& partner : p.partners) {
        const double theta = 5.0 + 3.0 * u(rng);
        std::array<std::array<double, 5>, 8> yearly{};
        for (auto& y : yearly)
            for (auto& v : y) v = u(rng);
        for (int t = p.first_t; t <= p.last_t; ++t) {
            gvckit::PanelObservation o;
            o.partner = partner;
            o.sector = m.sector;
            o.t = t;
            const auto& c = yearly[static_cast<std::size_t>(t / 12)];
            o.pop_growth_lag = c[0];
            o.gdp_pc_growth_lag = c[1];
            o.geo_dist = c[2];
            o.socio_cond = c[3];
            o.invest_profile = c[4];
            const bool post = window.post.contains(t);
            o.share = theta + (post ? beta : 0.0) + (post && partner == m.focal ? gamma : 0.0);
            for (std::size_t k = 0; k < 5; ++k) o.share += lambda[k] * c[k];
            if (noise_sd > 0.0) o.share += noise_sd * nd(rng);
            p.rows.push_back(o);
        }
    }
    return m;
}

}  // namespace fixtures
