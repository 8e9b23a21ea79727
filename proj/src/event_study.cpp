#include "gvckit/event_study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "gvckit/error.hpp"
#include "gvckit/io.hpp"

namespace gvckit {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kRankTolerance = 1e-9;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Columns that add a new direction, scanned left to right (modified Gram-Schmidt, two passes).
std::vector<std::size_t> independent_columns(const MatrixXd& x) {
    std::vector<std::size_t> kept;
    MatrixXd basis(x.rows(), 0);
    for (Index j = 0; j < x.cols(); ++j) {
        const double norm0 = x.col(j).norm();
        if (norm0 == 0.0) continue;
        VectorXd v = x.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (Index q = 0; q < basis.cols(); ++q) v -= basis.col(q).dot(v) * basis.col(q);
        const double norm = v.norm();
        if (norm <= kRankTolerance * norm0) continue;
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = v / norm;
        kept.push_back(static_cast<std::size_t>(j));
    }
    return kept;
}

struct Design {
    VectorXd y;
    MatrixXd x;
    std::vector<int> clusters;
    std::vector<std::string> names;
    Index gamma_col = 0;
    Index beta_col = 0;
    std::size_t absorbed = 0;  // fixed effects swept out by the within transform
};

}  // namespace

void EventWindow::check() const {
    if (baseline.first > baseline.last) throw InvalidInput("window " + label + ": empty baseline span");
    if (post.first > post.last) throw InvalidInput("window " + label + ": empty post span");
    if (baseline.last >= post.first) throw InvalidInput("window " + label + ": baseline must end before the post span starts");
}

EventWindow builtin_window(const std::string& label) {
    const MonthSpan baseline{month_index(2016, 1), month_index(2018, 9)};
    if (label == "A") return {"A", baseline, {month_index(2018, 10), month_index(2019, 12)}};
    if (label == "B") return {"B", baseline, {month_index(2020, 1), month_index(2022, 1)}};
    if (label == "C") return {"C", baseline, {month_index(2022, 2), month_index(2023, 12)}};
    throw InvalidInput("unknown window label '" + label + "' (expected A, B or C)");
}

const std::vector<std::string>& builtin_window_labels() {
    static const std::vector<std::string> labels = {"A", "B", "C"};
    return labels;
}

SeMode parse_se_mode(const std::string& text) {
    if (text == "robust") return SeMode::Robust;
    if (text == "classic") return SeMode::Classic;
    if (text == "cluster") return SeMode::Cluster;
    throw InvalidInput("se mode must be robust, classic or cluster, got '" + text + "'");
}

const char* se_mode_name(SeMode mode) {
    switch (mode) {
        case SeMode::Robust: return "robust";
        case SeMode::Classic: return "classic";
        case SeMode::Cluster: return "cluster";
    }
    return "?";
}

double two_sided_p(double t_stat, double dof) {
    if (!std::isfinite(t_stat) || !(dof > 0.0)) return kNan;
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t_stat)));
}

RegressionFit estimate_ols(const VectorXd& y, const MatrixXd& x, SeMode se_mode, const std::vector<int>& clusters,
                           const std::vector<std::string>& names) {
    const auto n = static_cast<std::size_t>(y.size());
    if (x.rows() != y.size()) throw InvalidInput("estimate_ols: X and y have different row counts");
    if (!y.allFinite() || !x.allFinite()) throw InvalidInput("estimate_ols: non-finite input");
    if (se_mode == SeMode::Cluster && clusters.size() != n)
        throw InvalidInput("estimate_ols: cluster mode needs one cluster id per row");

    RegressionFit fit;
    fit.n = n;
    fit.kept = independent_columns(x);
    std::set<std::size_t> kept_set(fit.kept.begin(), fit.kept.end());
    for (std::size_t j = 0; j < static_cast<std::size_t>(x.cols()); ++j) {
        if (kept_set.count(j)) continue;
        fit.dropped.push_back(j);
        fit.warnings.push_back("dropped column " + (j < names.size() ? names[j] : std::to_string(j)) +
                               ": linearly dependent on earlier columns");
    }
    const std::size_t k = fit.kept.size();
    fit.rank = k;
    if (n <= k) throw InvalidInput("estimate_ols: " + std::to_string(n) + " observations for " + std::to_string(k) + " columns");
    fit.dof = n - k;

    MatrixXd xk(x.rows(), static_cast<Index>(k));
    for (std::size_t c = 0; c < k; ++c) xk.col(static_cast<Index>(c)) = x.col(static_cast<Index>(fit.kept[c]));

    Eigen::HouseholderQR<MatrixXd> qr(xk);
    const VectorXd b = qr.solve(y);
    fit.fitted = xk * b;
    fit.residuals = y - fit.fitted;

    const auto kk = static_cast<Index>(k);
    const MatrixXd r = qr.matrixQR().topRows(kk).triangularView<Eigen::Upper>();
    const MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(kk, kk));
    const MatrixXd bread = r_inv * r_inv.transpose();
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);

    switch (se_mode) {
        case SeMode::Classic: {
            const double s2 = fit.residuals.squaredNorm() / (nd - kd);
            fit.cov = s2 * bread;
            break;
        }
        case SeMode::Robust: {
            const MatrixXd scaled = xk.array().colwise() * fit.residuals.array();
            const MatrixXd meat = scaled.transpose() * scaled;
            fit.cov = (nd / (nd - kd)) * bread * meat * bread;
            break;
        }
        case SeMode::Cluster: {
            std::map<int, VectorXd> scores;
            for (std::size_t i = 0; i < n; ++i) {
                auto [it, inserted] = scores.try_emplace(clusters[i], VectorXd::Zero(kk));
                it->second += xk.row(static_cast<Index>(i)).transpose() * fit.residuals(static_cast<Index>(i));
            }
            const double g = static_cast<double>(scores.size());
            if (g < 2) throw InvalidInput("estimate_ols: cluster standard errors need at least two clusters");
            MatrixXd meat = MatrixXd::Zero(kk, kk);
            for (const auto& [id, u] : scores) meat += u * u.transpose();
            fit.cov = (g / (g - 1.0)) * ((nd - 1.0) / (nd - kd)) * bread * meat * bread;
            break;
        }
    }

    fit.coef = VectorXd::Constant(x.cols(), kNan);
    fit.se = VectorXd::Constant(x.cols(), kNan);
    for (std::size_t c = 0; c < k; ++c) {
        fit.coef(static_cast<Index>(fit.kept[c])) = b(static_cast<Index>(c));
        fit.se(static_cast<Index>(fit.kept[c])) = std::sqrt(std::max(0.0, fit.cov(static_cast<Index>(c), static_cast<Index>(c))));
    }
    return fit;
}

namespace {

Design build_design(const std::vector<const PanelObservation*>& rows, const std::string& focal,
                    const EventWindow& window, FixedEffects form) {
    std::vector<std::string> partners;
    for (const auto* r : rows)
        if (partners.empty() || partners.back() != r->partner) partners.push_back(r->partner);
    std::sort(partners.begin(), partners.end());
    partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
    std::map<std::string, int> pid;
    for (std::size_t i = 0; i < partners.size(); ++i) pid[partners[i]] = static_cast<int>(i);

    const auto n = static_cast<Index>(rows.size());
    const auto P = static_cast<Index>(partners.size());
    Design d;
    d.y.resize(n);
    d.clusters.resize(rows.size());

    // Columns: [intercept, partner dummies (first partner is the reference)], Post, Treat*Post, 5 controls.
    const Index fe_cols = form == FixedEffects::Dummies ? P : 0;
    const Index cols = fe_cols + 2 + 5;
    d.x = MatrixXd::Zero(n, cols);
    if (form == FixedEffects::Dummies) {
        d.names.push_back("intercept");
        for (Index p = 1; p < P; ++p) d.names.push_back("fe_" + partners[static_cast<std::size_t>(p)]);
    }
    d.beta_col = fe_cols;
    d.gamma_col = fe_cols + 1;
    for (const char* name : {"post", "treat_post", "pop_growth_lag", "gdp_pc_growth_lag", "geo_dist", "socio_cond",
                             "invest_profile"})
        d.names.emplace_back(name);

    for (Index i = 0; i < n; ++i) {
        const auto* r = rows[static_cast<std::size_t>(i)];
        const int p = pid.at(r->partner);
        const double post = window.post.contains(r->t) ? 1.0 : 0.0;
        const double treat = r->partner == focal ? 1.0 : 0.0;
        d.y(i) = r->share;
        d.clusters[static_cast<std::size_t>(i)] = p;
        if (form == FixedEffects::Dummies) {
            d.x(i, 0) = 1.0;
            if (p > 0) d.x(i, p) = 1.0;
        }
        d.x(i, fe_cols + 0) = post;
        d.x(i, fe_cols + 1) = treat * post;
        d.x(i, fe_cols + 2) = r->pop_growth_lag;
        d.x(i, fe_cols + 3) = r->gdp_pc_growth_lag;
        d.x(i, fe_cols + 4) = r->geo_dist;
        d.x(i, fe_cols + 5) = r->socio_cond;
        d.x(i, fe_cols + 6) = r->invest_profile;
    }

    if (form == FixedEffects::Within) {
        VectorXd count = VectorXd::Zero(P);
        VectorXd y_mean = VectorXd::Zero(P);
        MatrixXd x_mean = MatrixXd::Zero(P, cols);
        for (Index i = 0; i < n; ++i) {
            const int p = d.clusters[static_cast<std::size_t>(i)];
            count(p) += 1.0;
            y_mean(p) += d.y(i);
            x_mean.row(p) += d.x.row(i);
        }
        for (Index p = 0; p < P; ++p) {
            y_mean(p) /= count(p);
            x_mean.row(p) /= count(p);
        }
        for (Index i = 0; i < n; ++i) {
            const int p = d.clusters[static_cast<std::size_t>(i)];
            d.y(i) -= y_mean(p);
            d.x.row(i) -= x_mean.row(p);
        }
        d.absorbed = static_cast<std::size_t>(P);
    }
    return d;
}

std::vector<const PanelObservation*> select_rows(const Panel& panel, const std::string& focal, const std::string& sector,
                                                 const EventWindow& window, const std::vector<std::string>& exclude) {
    std::vector<const PanelObservation*> rows;
    for (const auto& r : panel.rows) {
        if (r.sector != sector) continue;
        if (!window.baseline.contains(r.t) && !window.post.contains(r.t)) continue;
        if (r.partner != focal && std::find(exclude.begin(), exclude.end(), r.partner) != exclude.end()) continue;
        rows.push_back(&r);
    }
    return rows;
}

EffectEstimate estimate_rows(const std::vector<const PanelObservation*>& rows, const std::string& focal,
                              const std::string& sector, const EventWindow& window,
                             const EventStudyOptions& options) {
    EffectEstimate e;
    e.partner = focal;
    e.sector = sector;
    e.alpha = options.alpha;

    std::set<std::string> partners;
    std::size_t focal_pre = 0, focal_post = 0, others_post = 0, others_pre = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* r : rows) {
        partners.insert(r->partner);
        const bool post = window.post.contains(r->t);
        if (r->partner == focal) (post ? focal_post : focal_pre)++;
        else (post ? others_post : others_pre)++;
        lo = std::min(lo, r->share);
        hi = std::max(hi, r->share);
    }
    if (!partners.count(focal)) throw InvalidInput("focal partner '" + focal + "' has no observations in sector " + sector);
    if (partners.size() < 2) throw InvalidInput("at least two partners are needed (focal plus controls)");
    if (focal_pre == 0 || focal_post == 0 || others_pre == 0 || others_post == 0)
        throw DegenerateFit("panel does not cover both the baseline and the post span for treated and controls");
    if (!(hi > lo)) throw DegenerateFit("degenerate outcome: all shares identical in sector " + sector);

    auto d = build_design(rows, focal, window, options.form);
    auto fit = estimate_ols(d.y, d.x, options.se_mode, d.clusters, d.names);
    if (std::find(fit.kept.begin(), fit.kept.end(), static_cast<std::size_t>(d.gamma_col)) == fit.kept.end())
        throw DegenerateFit("Treat x Post is collinear with the other regressors");

    double cov_scale = 1.0;
    std::size_t dof = fit.dof;
    if (d.absorbed > 0) {
        if (fit.dof <= d.absorbed) throw InvalidInput("too few observations after absorbing fixed effects");
        dof = fit.dof - d.absorbed;
        if (options.se_mode != SeMode::Cluster) cov_scale = static_cast<double>(fit.dof) / static_cast<double>(dof);
    }

    e.gamma = fit.coef(d.gamma_col);
    e.beta_post = fit.coef(d.beta_col);
    e.n = fit.n;
    e.dof = dof;
    e.se = fit.se(d.gamma_col) * std::sqrt(cov_scale);
    for (const auto& w : fit.warnings) e.note += (e.note.empty() ? "" : "; ") + w;

    // An exact fit carries no sampling information; report the point estimate only.
    const double tss = (d.y.array() - d.y.mean()).square().sum();
    if (fit.residuals.squaredNorm() <= 1e-24 * std::max(tss, 1e-300)) {
        e.se = 0.0;
        e.t_stat = kNan;
        e.p_value = kNan;
        e.significant = false;
        e.note += (e.note.empty() ? "" : "; ") + std::string("exact fit: inference undefined");
        return e;
    }
    e.t_stat = e.gamma / e.se;
    e.p_value = two_sided_p(e.t_stat, static_cast<double>(dof));
    e.significant = e.p_value < options.alpha;
    return e;
}

}  // namespace

EffectEstimate run_event_study(const Panel& panel, const std::string& focal, const std::string& sector,
                               const EventWindow& window, const EventStudyOptions& options) {
    window.check();
    if (!(options.alpha > 0.0 && options.alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
    if (std::find(panel.partners.begin(), panel.partners.end(), focal) == panel.partners.end())
        throw InvalidInput("focal partner '" + focal + "' is not in the panel");
    if (std::find(panel.sectors.begin(), panel.sectors.end(), sector) == panel.sectors.end())
        throw InvalidInput("sector '" + sector + "' is not in the panel");
    const auto rows = select_rows(panel, focal, sector, window, options.exclude);
    return estimate_rows(rows, focal, sector, window, options);
}

const EffectEstimate& EffectMatrix::at(const std::string& partner, const std::string& sector) const {
    for (const auto& c : cells)
        if (c.partner == partner && c.sector == sector) return c;
    throw InvalidInput("no cell (" + partner + ", " + sector + ")");
}

EffectMatrix scan_all(const Panel& panel, const EventWindow& window, const EventStudyOptions& options) {
    window.check();
    EffectMatrix m;
    m.reporter = panel.reporter;
    m.flow = panel.flow;
    m.window = window.label;
    m.partners = panel.partners;
    m.sectors = panel.sectors;
    m.alpha = options.alpha;
    m.se_mode = options.se_mode;
    m.denominator = panel.denominator;
    for (const auto& partner : m.partners) {
        for (const auto& sector : m.sectors) {
            try {
                m.cells.push_back(run_event_study(panel, partner, sector, window, options));
            } catch (const std::exception& ex) {
                EffectEstimate e;
                e.partner = partner;
                e.sector = sector;
                e.alpha = options.alpha;
                e.estimable = false;
                e.gamma = e.se = e.t_stat = e.p_value = kNan;
                e.note = ex.what();
                m.cells.push_back(std::move(e));
            }
        }
    }
    m.tests = static_cast<std::size_t>(
        std::count_if(m.cells.begin(), m.cells.end(), [](const EffectEstimate& e) { return e.estimable; }));
    return m;
}

DualPositive dual_positive(const EffectMatrix& exports, const EffectMatrix& imports, double alpha) {
    DualPositive out;
    auto positives = [&](const EffectMatrix& m) {
        std::set<CellKey> s;
        for (const auto& c : m.cells)
            if (c.estimable && c.p_value < alpha && c.gamma > 0.0) s.insert({c.partner, c.sector});
        return s;
    };
    if (exports.partners != imports.partners || exports.sectors != imports.sectors)
        out.warnings.push_back("partner or sector vocabularies differ; using their intersection");
    const auto a = positives(exports);
    const auto b = positives(imports);
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.cells));
    return out;
}

std::vector<EffectEstimate> aggregate_sector_effect(const Panel& panel, const std::vector<std::string>& sectors,
                                                    const EventWindow& window, const EventStudyOptions& options) {
    if (sectors.empty()) throw InvalidInput("aggregate_sector_effect: no sectors");
    for (const auto& s : sectors)
        if (std::find(panel.sectors.begin(), panel.sectors.end(), s) == panel.sectors.end())
            throw InvalidInput("aggregate_sector_effect: sector '" + s + "' is not in the panel");

    std::string label;
    for (const auto& s : sectors) label += (label.empty() ? "" : "+") + s;

    Panel agg;
    agg.reporter = panel.reporter;
    agg.flow = panel.flow;
    agg.denominator = panel.denominator;
    agg.partners = panel.partners;
    agg.sectors = {label};
    agg.first_t = panel.first_t;
    agg.last_t = panel.last_t;
    std::map<std::pair<std::string, int>, PanelObservation> summed;
    for (const auto& s : sectors) {
        for (const auto& r : panel.rows) {
            if (r.sector != s) continue;
            auto [it, inserted] = summed.try_emplace({r.partner, r.t}, r);
            if (inserted) {
                it->second.sector = label;
            } else {
                it->second.share += r.share;
                it->second.imputed = it->second.imputed && r.imputed;
            }
        }
    }
    for (auto& [key, row] : summed) agg.rows.push_back(std::move(row));

    std::vector<EffectEstimate> out;
    for (const auto& partner : agg.partners) {
        try {
            out.push_back(run_event_study(agg, partner, label, window, options));
        } catch (const std::exception& ex) {
            EffectEstimate e;
            e.partner = partner;
            e.sector = label;
            e.alpha = options.alpha;
            e.estimable = false;
            e.gamma = e.se = e.t_stat = e.p_value = kNan;
            e.note = ex.what();
            out.push_back(std::move(e));
        }
    }
    return out;
}

void write_effects_header(std::ostream& out) { out << "reporter,flow,window,partner,sector,gamma,se,t,p,significant,estimable\n"; }

void write_effects_rows(std::ostream& out, const EffectMatrix& m) {
    auto num = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); };
    for (const auto& c : m.cells) {
        out << m.reporter << ',' << flow_code(m.flow) << ',' << m.window << ',' << c.partner << ',' << c.sector << ',';
        if (c.estimable)
            out << num(c.gamma) << ',' << num(c.se) << ',' << num(c.t_stat) << ',' << num(c.p_value) << ','
                << (c.significant ? "true" : "false") << ",true\n";
        else
            out << ",,,,false,false\n";
    }
}

void write_heatmap(std::ostream& out, const std::vector<EffectMatrix>& matrices) {
    std::set<std::string> sector_set;
    for (const auto& m : matrices) sector_set.insert(m.sectors.begin(), m.sectors.end());
    const std::vector<std::string> sectors(sector_set.begin(), sector_set.end());
    out << "reporter,flow,window,partner";
    for (const auto& s : sectors) out << ',' << s;
    out << '\n';
    for (const auto& m : matrices) {
        for (const auto& partner : m.partners) {
            out << m.reporter << ',' << flow_code(m.flow) << ',' << m.window << ',' << partner;
            for (const auto& s : sectors) {
                out << ',';
                for (const auto& c : m.cells)
                    if (c.partner == partner && c.sector == s && c.estimable && c.significant)
                        out << io::format_double(c.gamma);
            }
            out << '\n';
        }
    }
}

void write_dual_positive(std::ostream& out, const DualPositive& cells) {
    out << "partner,sector\n";
    for (const auto& c : cells.cells) out << c.partner << ',' << c.sector << '\n';
}

}  // namespace gvckit
