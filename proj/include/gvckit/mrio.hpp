#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gvckit {

// Fixed numerical tolerances. They are recorded verbatim in run manifests.
namespace tolerance {
inline constexpr double kBalanceRelative = 1e-6;
inline constexpr double kLeontiefResidual = 1e-9;
inline constexpr double kValueClosure = 1e-10;
inline constexpr double kMaxCondition = 1e12;
}  // namespace tolerance

/// One year of world input-output accounts for G countries x N sectors.
///
/// Rows and columns of the (G*N)-sized objects are country-major: index
/// `c * N + i` is sector i of country c.
struct MrioTable {
    int year = 0;
    std::vector<std::string> countries;
    std::vector<std::string> sectors;
    Eigen::MatrixXd intermediate;  // Z, (G*N) x (G*N)
    Eigen::MatrixXd final_demand;  // Y, (G*N) x G, categories pre-summed per destination
    Eigen::VectorXd value_added;   // VA, G*N
    Eigen::VectorXd output;        // X, G*N

    std::size_t num_countries() const { return countries.size(); }
    std::size_t num_sectors() const { return sectors.size(); }
    std::size_t dim() const { return countries.size() * sectors.size(); }

    // Throws InvalidInput for an unknown code.
    std::size_t country_index(const std::string& code) const;
    std::size_t sector_index(const std::string& code) const;

    bool operator==(const MrioTable&) const = default;
};

enum class MrioFormat { CanonicalV1 };

MrioTable load_mrio(const std::filesystem::path& path, MrioFormat format = MrioFormat::CanonicalV1);
void write_mrio(const MrioTable& table, const std::filesystem::path& path);

enum class Severity { Warning, Violation };

struct Finding {
    Severity severity = Severity::Violation;
    std::string check;      // e.g. "column_balance", "negative_final_demand"
    std::ptrdiff_t row = -1;
    std::ptrdiff_t column = -1;
    double magnitude = 0.0;  // relative for balances, the offending value otherwise
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool passed() const;
    std::vector<Finding> violations() const;
    std::vector<Finding> warnings() const;
};

ValidationReport validate_mrio(const MrioTable& table);

struct CoefMatrices {
    Eigen::MatrixXd input_coef;           // A
    Eigen::RowVectorXd va_coef;           // V
    Eigen::MatrixXd leontief;             // B = (I - A)^-1
    std::vector<Eigen::MatrixXd> local;   // L^{ss} = (I_N - A^{ss})^-1, one per country
    // Row t holds V^t B^{t.}: value added of country t embodied per unit of each column's output.
    Eigen::MatrixXd origin_content;
    double condition_estimate = 1.0;      // 1-norm estimate for I - A
    double leontief_residual = 0.0;       // max |B(I-A) - I|
    double local_residual = 0.0;          // max over countries
    bool refined = false;                 // one refinement pass was needed
};

CoefMatrices coefficients(const MrioTable& table);

// Row vector V^s B^{ss} etc. are read from these helpers; blocks are N x N views.
inline auto block(const Eigen::MatrixXd& m, std::size_t row_country, std::size_t col_country, std::size_t n) {
    return m.block(static_cast<Eigen::Index>(row_country * n), static_cast<Eigen::Index>(col_country * n),
                   static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

struct SynthMrioSpec {
    std::size_t countries = 3;
    std::size_t sectors = 2;
    std::uint64_t seed = 1;
    double density = 0.6;    // probability that an off-diagonal-block coefficient is nonzero
    bool inventory = false;  // plant one small negative final-demand cell
    int year = 2020;
    double max_column_sum = 0.8;
    // Multiplies every cross-country coefficient; lets callers build worlds with rising integration.
    double foreign_scale = 1.0;
    std::optional<std::vector<std::string>> country_codes;
    std::optional<std::vector<std::string>> sector_codes;
};

MrioTable synth_mrio(const SynthMrioSpec& spec);

}  // namespace gvckit
