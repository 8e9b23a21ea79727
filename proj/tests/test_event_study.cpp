#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "gvckit/error.hpp"
#include "gvckit/event_study.hpp"

using namespace gvckit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using LMat = std::vector<std::vector<long double>>;

// Gauss-Jordan inverse with partial pivoting, all in long double.
LMat inverse(LMat a) {
    const std::size_t k = a.size();
    LMat inv(k, std::vector<long double>(k, 0.0L));
    for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0L;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < k; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const long double d = a[c][c];
        for (std::size_t j = 0; j < k; ++j) {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (r == c) continue;
            const long double f = a[r][c];
            for (std::size_t j = 0; j < k; ++j) {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    return inv;
}

LMat cross(const MatrixXd& x) {
    const auto k = static_cast<std::size_t>(x.cols());
    LMat out(k, std::vector<long double>(k, 0.0L));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
                out[a][b] += static_cast<long double>(x(i, static_cast<Eigen::Index>(a))) * x(i, static_cast<Eigen::Index>(b));
    return out;
}

std::vector<long double> normal_equations(const MatrixXd& x, const VectorXd& y) {
    const auto k = static_cast<std::size_t>(x.cols());
    std::vector<long double> xty(k, 0.0L);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (std::size_t a = 0; a < k; ++a) xty[a] += static_cast<long double>(x(i, static_cast<Eigen::Index>(a))) * y(i);
    const auto inv = inverse(cross(x));
    std::vector<long double> b(k, 0.0L);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t c = 0; c < k; ++c) b[a] += inv[a][c] * xty[c];
    return b;
}

// Sandwich standard errors: bread (X'X)^-1, meat sum over groups of (sum x_i e_i)(sum x_i e_i)'.
std::vector<long double> sandwich_se(const MatrixXd& x, const VectorXd& y, const std::vector<int>& groups,
                                     long double scale) {
    const auto k = static_cast<std::size_t>(x.cols());
    const auto b = normal_equations(x, y);
    std::map<int, std::vector<long double>> scores;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        long double e = y(i);
        for (std::size_t a = 0; a < k; ++a) e -= b[a] * x(i, static_cast<Eigen::Index>(a));
        auto& s = scores.try_emplace(groups[static_cast<std::size_t>(i)], std::vector<long double>(k, 0.0L)).first->second;
        for (std::size_t a = 0; a < k; ++a) s[a] += x(i, static_cast<Eigen::Index>(a)) * e;
    }
    LMat meat(k, std::vector<long double>(k, 0.0L));
    for (const auto& [g, s] : scores)
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t c = 0; c < k; ++c) meat[a][c] += s[a] * s[c];
    const auto bread = inverse(cross(x));
    std::vector<long double> se(k);
    for (std::size_t a = 0; a < k; ++a) {
        long double v = 0.0L;
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q) v += bread[a][p] * meat[p][q] * bread[q][a];
        se[a] = std::sqrt(scale * v);
    }
    return se;
}

struct Problem {
    MatrixXd x;
    VectorXd y;
    VectorXd beta;
};

Problem random_problem(Eigen::Index n, Eigen::Index k, std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Problem p{MatrixXd(n, k), VectorXd(n), VectorXd(k)};
    for (Eigen::Index j = 0; j < k; ++j) p.beta(j) = 2.0 * nd(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
        p.x(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < k; ++j) p.x(i, j) = nd(rng) * (1.0 + 0.5 * static_cast<double>(j)) + 0.3 * j;
    }
    p.y = p.x * p.beta;
    for (Eigen::Index i = 0; i < n; ++i) p.y(i) += noise * nd(rng) * (1.0 + std::abs(p.x(i, 1)));
    return p;
}

EffectEstimate est(const std::string& partner, const std::string& sector, double gamma, double p) {
    EffectEstimate e;
    e.partner = partner;
    e.sector = sector;
    e.gamma = gamma;
    e.p_value = p;
    e.significant = p < 0.10;
    return e;
}

EffectMatrix matrix(Flow flow, std::vector<EffectEstimate> cells) {
    EffectMatrix m;
    m.reporter = flow == Flow::Export ? "CHN" : "USA";
    m.flow = flow;
    m.window = "A";
    std::set<std::string> ps, ss;
    for (const auto& c : cells) {
        ps.insert(c.partner);
        ss.insert(c.sector);
    }
    m.partners.assign(ps.begin(), ps.end());
    m.sectors.assign(ss.begin(), ss.end());
    m.cells = std::move(cells);
    return m;
}

SynthPanelSpec generator_spec(std::vector<std::string> partners, std::uint64_t seed, double noise) {
    SynthPanelSpec s;
    s.partners = std::move(partners);
    s.sectors = kAggregateSectors;
    s.months = 48;
    s.seed = seed;
    s.noise_sd = noise;
    return s;
}

const std::vector<std::string> kEight = {"DEU", "IND", "JPN", "KOR", "MEX", "MYS", "THA", "VNM"};

}  // namespace

TEST_CASE("estimate_ols exact recovery and residual identity") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto p = random_problem(60, 6, seed, 0.0);
        auto fit = estimate_ols(p.y, p.x);
        CHECK(fit.rank == 6);
        CHECK(fit.dof == 54);
        CHECK((fit.coef - p.beta).cwiseAbs().maxCoeff() <= 1e-10);

        auto noisy = random_problem(60, 6, seed, 1.0);
        auto nf = estimate_ols(noisy.y, noisy.x);
        CHECK((nf.fitted + nf.residuals - noisy.y).cwiseAbs().maxCoeff() <= 1e-10);
        // Residuals are orthogonal to every regressor.
        CHECK((noisy.x.transpose() * nf.residuals).cwiseAbs().maxCoeff() <= 1e-8 * noisy.y.norm());
    }
}

TEST_CASE("estimate_ols drops a duplicated column") {
    auto p = random_problem(80, 4, 3, 0.5);
    MatrixXd x2(80, 5);
    x2 << p.x, p.x.col(2);
    auto base = estimate_ols(p.y, p.x);
    auto dup = estimate_ols(p.y, x2, SeMode::Robust, {}, {"c0", "c1", "c2", "c3", "copy_of_c2"});
    CHECK(dup.dropped == std::vector<std::size_t>{4});
    REQUIRE(dup.warnings.size() == 1);
    CHECK(dup.warnings[0].find("copy_of_c2") != std::string::npos);
    CHECK(std::isnan(dup.coef(4)));
    CHECK((dup.coef.head(4) - base.coef).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((dup.se.head(4) - base.se).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(dup.dof == base.dof);
}

TEST_CASE("estimate_ols against an extended-precision normal-equations solve") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        auto p = random_problem(500, 8, seed, 2.0);
        auto fit = estimate_ols(p.y, p.x);
        const auto oracle = normal_equations(p.x, p.y);
        for (Eigen::Index j = 0; j < 8; ++j)
            CHECK(std::abs(fit.coef(j) - static_cast<double>(oracle[static_cast<std::size_t>(j)])) <= 1e-8);
    }
}

TEST_CASE("standard errors against independent sandwich formulas") {
    auto p = random_problem(240, 5, 21, 1.5);
    const long double n = 240, k = 5;
    std::vector<int> rows(240), clusters(240);
    for (int i = 0; i < 240; ++i) {
        rows[static_cast<std::size_t>(i)] = i;
        clusters[static_cast<std::size_t>(i)] = i % 12;
    }

    auto robust = estimate_ols(p.y, p.x, SeMode::Robust);
    auto hc1 = sandwich_se(p.x, p.y, rows, n / (n - k));
    auto cluster = estimate_ols(p.y, p.x, SeMode::Cluster, clusters);
    auto cr1 = sandwich_se(p.x, p.y, clusters, (12.0L / 11.0L) * ((n - 1) / (n - k)));
    auto classic = estimate_ols(p.y, p.x, SeMode::Classic);

    const auto b = normal_equations(p.x, p.y);
    long double rss = 0.0L;
    for (Eigen::Index i = 0; i < 240; ++i) {
        long double e = p.y(i);
        for (std::size_t a = 0; a < 5; ++a) e -= b[a] * p.x(i, static_cast<Eigen::Index>(a));
        rss += e * e;
    }
    const auto bread = inverse(cross(p.x));
    for (std::size_t j = 0; j < 5; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        CHECK(robust.se(jj) == doctest::Approx(static_cast<double>(hc1[j])).epsilon(1e-9));
        CHECK(cluster.se(jj) == doctest::Approx(static_cast<double>(cr1[j])).epsilon(1e-9));
        const double classic_se = static_cast<double>(std::sqrt(rss / (n - k) * bread[j][j]));
        CHECK(classic.se(jj) == doctest::Approx(classic_se).epsilon(1e-9));
    }
    CHECK_THROWS_AS(estimate_ols(p.y, p.x, SeMode::Cluster, {}), InvalidInput);
    CHECK_THROWS_AS(estimate_ols(p.y.head(5), p.x.topRows(5)), InvalidInput);
    VectorXd bad = p.y;
    bad(3) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(estimate_ols(bad, p.x), InvalidInput);
}

TEST_CASE("two-sided p-values") {
    for (double t : {0.0, 0.3, 1.0, 2.5, 7.0}) {
        CHECK(two_sided_p(t, 1.0) == doctest::Approx(1.0 - 2.0 / std::numbers::pi * std::atan(t)).epsilon(1e-12));
        CHECK(two_sided_p(-t, 2.0) == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-12));
    }
    CHECK(std::isnan(two_sided_p(1.0, 0.0)));
}

TEST_CASE("windows") {
    const auto a = builtin_window("A");
    CHECK(a.baseline == MonthSpan{0, 32});
    CHECK(a.post == MonthSpan{33, 47});
    CHECK(builtin_window("B").post == MonthSpan{48, 72});
    CHECK(builtin_window("C").post == MonthSpan{73, 95});
    CHECK_THROWS_AS(builtin_window("D"), InvalidInput);
    EventWindow overlap{"x", {0, 10}, {10, 20}};
    CHECK_THROWS_AS(overlap.check(), InvalidInput);
}

TEST_CASE("run_event_study on panels that follow the model") {
    const auto window = builtin_window("A");

    SUBCASE("noiseless planted effects are recovered exactly") {
        for (double gamma : {0.0, 5.0, -2.5}) {
            auto m = fixtures::model_panel(12, gamma, 7);
            auto e = run_event_study(m.panel, m.focal, m.sector, window);
            CHECK(std::abs(e.gamma - gamma) <= 1e-10);
            CHECK(std::abs(e.beta_post - 0.7) <= 1e-10);
            CHECK_FALSE(e.significant);
        }
    }
    SUBCASE("dummy and within forms agree") {
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            auto m = fixtures::model_panel(9, 1.5, seed, 0.8);
            EventStudyOptions dummies, within;
            within.form = FixedEffects::Within;
            dummies.se_mode = within.se_mode = SeMode::Classic;
            auto d = run_event_study(m.panel, m.focal, m.sector, window, dummies);
            auto w = run_event_study(m.panel, m.focal, m.sector, window, within);
            CHECK(std::abs(d.gamma - w.gamma) <= 1e-8);
            CHECK(d.se == doctest::Approx(w.se).epsilon(1e-9));
            CHECK(d.dof == w.dof);
        }
    }
    SUBCASE("a constant added to every share leaves gamma unchanged") {
        auto m = fixtures::model_panel(10, 2.0, 4, 0.5);
        auto shifted = m.panel;
        for (auto& r : shifted.rows) r.share += 17.0;
        auto a = run_event_study(m.panel, m.focal, m.sector, window);
        auto b = run_event_study(shifted, m.focal, m.sector, window);
        CHECK(std::abs(a.gamma - b.gamma) <= 1e-10);
    }
    SUBCASE("significance follows the p-value") {
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            auto m = fixtures::model_panel(8, 0.4, seed, 1.0);
            for (auto mode : {SeMode::Robust, SeMode::Classic, SeMode::Cluster}) {
                EventStudyOptions o;
                o.se_mode = mode;
                auto e = run_event_study(m.panel, m.focal, m.sector, window, o);
                CHECK(e.se > 0.0);
                CHECK(e.significant == (e.p_value < 0.10));
                CHECK(e.t_stat == doctest::Approx(e.gamma / e.se));
            }
        }
    }
    SUBCASE("excluded partners leave the control pool") {
        auto m = fixtures::model_panel(10, 2.0, 5, 0.5);
        EventStudyOptions o;
        o.exclude = {m.panel.partners[0], m.panel.partners[1]};
        auto e = run_event_study(m.panel, m.focal, m.sector, window, o);
        CHECK(e.n == 8 * 48);
    }
    SUBCASE("errors") {
        auto m = fixtures::model_panel(6, 1.0, 2);
        CHECK_THROWS_AS(run_event_study(m.panel, "ZZZ", m.sector, window), InvalidInput);
        CHECK_THROWS_AS(run_event_study(m.panel, m.focal, "apparel", window), InvalidInput);
        auto flat = m.panel;
        for (auto& r : flat.rows) r.share = 12.5;
        CHECK_THROWS_AS(run_event_study(flat, m.focal, m.sector, window), DegenerateFit);
        auto early = m.panel;
        std::erase_if(early.rows, [](const PanelObservation& r) { return r.t > 32; });
        CHECK_THROWS_AS(run_event_study(early, m.focal, m.sector, window), DegenerateFit);
    }
}

TEST_CASE("null rejection rate stays near alpha") {
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto m = fixtures::model_panel(20, 0.0, 5000 + seed, 1.0);
        rejections += run_event_study(m.panel, m.focal, m.sector, builtin_window("A")).significant;
    }
    const double rate = rejections / 200.0;
    CHECK(rate >= 0.045);
    CHECK(rate <= 0.155);
}

TEST_CASE("scan_all") {
    SUBCASE("3 partners x 2 sectors give 6 ordered cells") {
        SynthPanelSpec s;
        s.partners = {"VNM", "DEU", "MEX"};
        s.sectors = {"machinery", "apparel"};
        s.months = 48;
        s.seed = 3;
        s.noise_sd = 0.5;
        auto m = scan_all(fixtures::panel_from(synth_panel(s)), builtin_window("A"));
        REQUIRE(m.cells.size() == 6);
        CHECK(m.tests == 6);
        const std::vector<std::pair<std::string, std::string>> order = {
            {"DEU", "apparel"}, {"DEU", "machinery"}, {"MEX", "apparel"},
            {"MEX", "machinery"}, {"VNM", "apparel"}, {"VNM", "machinery"}};
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(m.cells[i].partner == order[i].first);
            CHECK(m.cells[i].sector == order[i].second);
        }
        std::ostringstream a, b;
        write_effects_rows(a, m);
        write_effects_rows(b, scan_all(fixtures::panel_from(synth_panel(s)), builtin_window("A")));
        CHECK(a.str() == b.str());
    }
    SUBCASE("a constant sector is isolated as not estimable") {
        auto m = fixtures::model_panel(4, 1.0, 9, 0.5);
        auto panel = m.panel;
        const auto rows = panel.rows;
        for (auto r : rows) {
            r.sector = "apparel";
            r.share = 25.0;
            panel.rows.push_back(r);
        }
        panel.sectors = {"apparel", "machinery"};
        std::stable_sort(panel.rows.begin(), panel.rows.end(),
                         [](const auto& x, const auto& y) { return x.sector < y.sector; });
        auto scan = scan_all(panel, builtin_window("A"));
        REQUIRE(scan.cells.size() == 8);
        for (const auto& c : scan.cells) {
            CHECK(c.estimable == (c.sector == "machinery"));
            if (!c.estimable) CHECK(c.note.find("identical") != std::string::npos);
        }
        CHECK(scan.tests == 4);
    }
}

TEST_CASE("renormalisation shifts non-planted cells by a closed form") {
    // Time-constant controls are absorbed by the partner effects, so each regression is a plain
    // pooled-others difference in differences: gamma_i = Delta_i * P / (P - 1).
    auto spec = generator_spec(kEight, 31, 0.0);
    spec.effects = {{"IND", "machinery", 33, 4.0}};
    auto synth = synth_panel(spec);
    fixtures::flatten_controls(synth);
    const auto panel = fixtures::panel_from(synth);
    const auto scan = scan_all(panel, builtin_window("A"));
    const double P = 8.0;
    const double treated = synth.baseline_shares.at({"machinery", "IND"});
    for (const auto& partner : spec.partners) {
        const double base = synth.baseline_shares.at({"machinery", partner});
        const double delta = partner == "IND" ? 4.0 : -base * 4.0 / (100.0 - treated);
        CHECK(std::abs(scan.at(partner, "machinery").gamma - delta * P / (P - 1.0)) <= 1e-10);
        CHECK(std::abs(scan.at(partner, "chemicals").gamma) <= 1e-10);
    }
}

TEST_CASE("planted cells are recovered in the scan") {
    struct Tally {
        int all_planted = 0;  // every planted cell significant-positive
        int exact = 0;        // and nothing else
    };
    auto scan_runs = [](const std::vector<std::string>& sectors, bool flat) {
        Tally tally;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto spec = generator_spec(kEight, 9000 + seed, 0.3);
            spec.sectors = sectors;
            spec.effects = {{"VNM", "machinery", 33, 4.0},
                            {"MEX", "transport", 33, 4.0},
                            {"THA", "chemicals", 33, 4.0},
                            {"IND", "materials", 33, 4.0}};
            auto synth = synth_panel(spec);
            if (flat) fixtures::flatten_controls(synth);
            const auto scan = scan_all(fixtures::panel_from(synth), builtin_window("A"));
            std::set<std::pair<std::string, std::string>> positives;
            for (const auto& c : scan.cells)
                if (c.estimable && c.significant && c.gamma > 0.0) positives.insert({c.partner, c.sector});
            const std::set<std::pair<std::string, std::string>> planted = {
                {"IND", "materials"}, {"MEX", "transport"}, {"THA", "chemicals"}, {"VNM", "machinery"}};
            tally.all_planted += std::includes(positives.begin(), positives.end(), planted.begin(), planted.end());
            tally.exact += positives == planted;
        }
        return tally;
    };
    const std::vector<std::string> four = {"chemicals", "machinery", "materials", "transport"};

    // Every non-planted cell shares a sector with a planted one and carries the negative
    // renormalisation shift, so with time-constant controls nothing else turns positive.
    const auto isolated = scan_runs(four, true);
    CHECK(isolated.all_planted >= 95);
    CHECK(isolated.exact >= 95);

    const auto dynamic = scan_runs(four, false);
    const auto with_null_sector = scan_runs(kAggregateSectors, false);
    CHECK(dynamic.all_planted >= 95);
    CHECK(with_null_sector.all_planted >= 95);
    MESSAGE("exactly the planted cells: " << isolated.exact << "/100 with time-constant controls, " << dynamic.exact
                                          << "/100 with the generator's control paths, " << with_null_sector.exact
                                          << "/100 with an unplanted fifth sector");
}

TEST_CASE("dual_positive") {
    const auto exp = matrix(Flow::Export, {est("VNM", "machinery", 3.0, 0.01), est("VNM", "materials", 2.0, 0.02),
                                           est("THA", "apparel", 1.0, 0.5), est("THA", "machinery", -3.0, 0.01),
                                           est("THA", "materials", 1.0, 0.4), est("VNM", "apparel", 1.0, 0.3)});
    const auto imp = matrix(Flow::Import, {est("VNM", "machinery", 1.0, 0.05), est("VNM", "materials", 2.0, 0.5),
                                           est("THA", "apparel", 1.0, 0.01), est("THA", "machinery", -3.0, 0.01),
                                           est("THA", "materials", 1.0, 0.4), est("VNM", "apparel", 1.0, 0.3)});
    auto d = dual_positive(exp, imp, 0.10);
    REQUIRE(d.cells.size() == 1);
    CHECK(d.cells[0] == CellKey{"VNM", "machinery"});
    CHECK(d.warnings.empty());
    CHECK(dual_positive(exp, imp, 0.04).cells.empty());

    const auto none = matrix(Flow::Import, {est("VNM", "machinery", 1.0, 0.9)});
    auto e = dual_positive(exp, none, 0.10);
    CHECK(e.cells.empty());
    CHECK(e.warnings.size() == 1);

    std::ostringstream out;
    write_dual_positive(out, d);
    CHECK(out.str() == "partner,sector\nVNM,machinery\n");
}

TEST_CASE("aggregate_sector_effect") {
    const auto window = builtin_window("A");
    SUBCASE("a single sector reproduces the per-sector estimate") {
        auto spec = generator_spec(fixtures::partner_codes(6), 12, 0.5);
        spec.effects = {{"DEU", "machinery", 33, 3.0}};
        const auto panel = fixtures::panel_from(synth_panel(spec));
        auto agg = aggregate_sector_effect(panel, {"machinery"}, window);
        REQUIRE(agg.size() == 6);
        for (const auto& a : agg) {
            auto e = run_event_study(panel, a.partner, "machinery", window);
            CHECK(a.gamma == e.gamma);
            CHECK(a.se == e.se);
        }
        CHECK_THROWS_AS(aggregate_sector_effect(panel, {"apparel"}, window), InvalidInput);
    }
    SUBCASE("five equal effects add up") {
        // Every sector shares one design matrix, so the summed-share estimate is the sum of the
        // per-sector estimates.
        const double e = 1.0, P = 20.0;
        int near_5e = 0, near_estimand = 0;
        double mean = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto spec = generator_spec(fixtures::partner_codes(20), 700 + seed, 0.3);
            for (const auto& s : kAggregateSectors) spec.effects.push_back({"KOR", s, 33, e});
            const auto panel = fixtures::panel_from(synth_panel(spec));
            auto agg = aggregate_sector_effect(panel, kAggregateSectors, window);
            const auto& kor = *std::find_if(agg.begin(), agg.end(), [](const auto& x) { return x.partner == "KOR"; });
            double summed = 0.0;
            for (const auto& s : kAggregateSectors) summed += run_event_study(panel, "KOR", s, window).gamma;
            CHECK(std::abs(kor.gamma - summed) <= 1e-10);
            near_5e += std::abs(kor.gamma - 5.0 * e) <= 2.0 * kor.se;
            near_estimand += std::abs(kor.gamma - 5.0 * e * P / (P - 1.0)) <= 2.0 * kor.se;
            mean += kor.gamma / 100.0;
        }
        MESSAGE("mean aggregated gamma " << mean << "; within 2 se of 5e in " << near_5e
                                         << "/100 seeds, of 5e*P/(P-1) in " << near_estimand << "/100");
        CHECK(std::abs(mean - 5.0 * e * P / (P - 1.0)) <= 0.05);
    }
    SUBCASE("noise-free aggregation hits the generator's estimand") {
        auto spec = generator_spec(fixtures::partner_codes(20), 700, 0.0);
        for (const auto& s : kAggregateSectors) spec.effects.push_back({"KOR", s, 33, 1.0});
        auto synth = synth_panel(spec);
        fixtures::flatten_controls(synth);
        auto agg = aggregate_sector_effect(fixtures::panel_from(synth), kAggregateSectors, window);
        const auto& kor = *std::find_if(agg.begin(), agg.end(), [](const auto& x) { return x.partner == "KOR"; });
        CHECK(std::abs(kor.gamma - 5.0 * 20.0 / 19.0) <= 1e-10);
    }
    SUBCASE("zero effect is rarely significant") {
        int quiet = 0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            auto spec = generator_spec(fixtures::partner_codes(20), 1300 + seed, 0.3);
            auto agg = aggregate_sector_effect(fixtures::panel_from(synth_panel(spec)), kAggregateSectors, window);
            quiet += !agg[7].significant;
        }
        const double rate = quiet / 200.0;
        CHECK(rate >= 0.845);
        CHECK(rate <= 0.955);
    }
}

TEST_CASE("effects and heatmap writers") {
    auto m = fixtures::model_panel(3, 4.0, 2, 0.2);
    EventStudyOptions o;
    o.alpha = 1.0;
    auto scan = scan_all(m.panel, builtin_window("A"), o);
    std::ostringstream effects, heat;
    write_effects_header(effects);
    write_effects_rows(effects, scan);
    CHECK(effects.str().rfind("reporter,flow,window,partner,sector,gamma,se,t,p,significant,estimable\n", 0) == 0);
    const auto text = effects.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    write_heatmap(heat, {scan});
    std::istringstream lines(heat.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "reporter,flow,window,partner,machinery");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(line.back() != ',');  // alpha 1.0 masks nothing
    }
    CHECK(rows == 3);
}
