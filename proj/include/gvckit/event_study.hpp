#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gvckit/trade.hpp"

namespace gvckit {

struct MonthSpan {
    int first = 0;  // month index, inclusive
    int last = 0;   // inclusive

    bool contains(int t) const { return t >= first && t <= last; }
    bool operator==(const MonthSpan&) const = default;
};

struct EventWindow {
    std::string label;
    MonthSpan baseline;
    MonthSpan post;

    void check() const;  // throws InvalidInput unless disjoint, ordered and non-empty
};

// Built-in windows: baseline Jan 2016 - Sep 2018 with posts
//   A: Oct 2018 - Dec 2019, B: Jan 2020 - Jan 2022, C: Feb 2022 - Dec 2023.
EventWindow builtin_window(const std::string& label);
const std::vector<std::string>& builtin_window_labels();

enum class SeMode { Robust, Classic, Cluster };

SeMode parse_se_mode(const std::string& text);
const char* se_mode_name(SeMode mode);

struct RegressionFit {
    Eigen::VectorXd coef;       // one per input column; NaN for dropped columns
    Eigen::VectorXd se;         // same layout
    Eigen::MatrixXd cov;        // over kept columns only, in kept order
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    std::size_t n = 0;
    std::size_t rank = 0;
    std::size_t dof = 0;        // n - rank
    std::vector<std::string> warnings;
};

/// Least squares through a Householder QR of the columns that survive a sequential rank scan.
///
/// Columns are examined left to right and a column is dropped (with a warning) when it lies
/// in the span of the columns kept before it, so earlier columns take precedence.
/// `clusters` is required for SeMode::Cluster and holds one group id per row.
RegressionFit estimate_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, SeMode se_mode = SeMode::Robust,
                           const std::vector<int>& clusters = {}, const std::vector<std::string>& names = {});

// Two-sided p-value of a t statistic.
double two_sided_p(double t_stat, double dof);

struct EffectEstimate {
    std::string partner;
    std::string sector;
    double gamma = 0.0;  // percentage points
    double se = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    bool significant = false;
    double alpha = 0.10;
    bool estimable = true;
    std::string note;  // reason when not estimable, dropped-column warnings otherwise
    double beta_post = 0.0;
    std::size_t n = 0;
    std::size_t dof = 0;
};

enum class FixedEffects { Dummies, Within };

struct EventStudyOptions {
    SeMode se_mode = SeMode::Robust;
    double alpha = 0.10;
    std::vector<std::string> exclude;  // partners removed from the control pool
    FixedEffects form = FixedEffects::Dummies;
};

// Trade share of `focal` against the pooled other partners, one sector, one window:
//   share = theta_i + beta Post + gamma Treat*Post + lambda' controls + e.
// The standalone Treat column is absorbed by the partner fixed effects.
EffectEstimate run_event_study(const Panel& panel, const std::string& focal, const std::string& sector,
                               const EventWindow& window, const EventStudyOptions& options = {});

struct EffectMatrix {
    std::string reporter;
    Flow flow = Flow::Export;
    std::string window;
    std::vector<std::string> partners;
    std::vector<std::string> sectors;
    std::vector<EffectEstimate> cells;  // partner-major, both lexicographic
    double alpha = 0.10;
    SeMode se_mode = SeMode::Robust;
    Denominator denominator = Denominator::Included;
    std::size_t tests = 0;

    const EffectEstimate& at(const std::string& partner, const std::string& sector) const;
};

EffectMatrix scan_all(const Panel& panel, const EventWindow& window, const EventStudyOptions& options = {});

struct CellKey {
    std::string partner;
    std::string sector;
    bool operator==(const CellKey&) const = default;
    auto operator<=>(const CellKey&) const = default;
};

struct DualPositive {
    std::vector<CellKey> cells;
    std::vector<std::string> warnings;
};

DualPositive dual_positive(const EffectMatrix& exports, const EffectMatrix& imports, double alpha);

inline const std::vector<std::string> kAggregateSectors = {"chemicals", "machinery", "materials", "miscellaneous",
                                                           "transport"};

// Sums the listed sectors' shares into one series and re-estimates gamma for every partner.
std::vector<EffectEstimate> aggregate_sector_effect(const Panel& panel, const std::vector<std::string>& sectors,
                                                    const EventWindow& window,
                                                    const EventStudyOptions& options = {});

// CSV emission.
void write_effects_header(std::ostream& out);
void write_effects_rows(std::ostream& out, const EffectMatrix& matrix);
void write_heatmap(std::ostream& out, const std::vector<EffectMatrix>& matrices);
void write_dual_positive(std::ostream& out, const DualPositive& cells);

}  // namespace gvckit
