#include "gvckit/mrio.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gvckit/error.hpp"
#include "gvckit/io.hpp"
#include "random.hpp"

namespace gvckit {

namespace {

const std::vector<std::string> kSyntheticCountries = {
    "CHN", "USA", "VNM", "MEX", "DEU", "JPN", "KOR", "IND", "THA", "MYS", "IDN", "SGP", "TWN",
    "GBR", "FRA", "ITA", "CAN", "BRA", "AUS", "NLD", "ESP", "PHL", "BGD", "PAK", "LKA", "KHM",
    "LAO", "NPL", "MNG", "BRN", "MDV", "BTN", "FJI", "KAZ", "KGZ", "HKG", "TUR", "RUS", "POL",
    "CZE", "HUN", "SVK", "SVN", "ROU", "BGR", "HRV", "AUT", "BEL", "DNK", "FIN", "SWE", "IRL",
    "PRT", "GRC", "LUX", "EST", "LVA", "LTU", "CYP", "MLT", "CHE", "NOR"};

std::size_t find_code(const std::vector<std::string>& codes, const std::string& code, const char* what) {
    auto it = std::find(codes.begin(), codes.end(), code);
    if (it == codes.end()) throw InvalidInput(std::string("unknown ") + what + " code '" + code + "'");
    return static_cast<std::size_t>(it - codes.begin());
}

class RowReader {
public:
    RowReader(const std::filesystem::path& path) : file_(path.string()), lines_(io::read_lines(path)) {
        while (!lines_.empty() && io::trim(lines_.back()).empty()) lines_.pop_back();
    }

    // Returns the cells of the next line (1-based number in `line_no`).
    std::vector<std::string> next(const char* section) {
        if (pos_ >= lines_.size())
            throw ParseError(file_, pos_ + 1, 0, std::string("unexpected end of file while reading ") + section);
        ++pos_;
        return io::split(lines_[pos_ - 1]);
    }

    std::size_t line_no() const { return pos_; }
    bool done() const { return pos_ >= lines_.size(); }
    const std::string& file() const { return file_; }

    double number(const std::vector<std::string>& cells, std::size_t col) const {
        auto v = io::parse_double(cells[col]);
        if (!v || !std::isfinite(*v))
            throw ParseError(file_, pos_, col + 1, "non-numeric cell '" + cells[col] + "'");
        return *v;
    }

    void expect_width(const std::vector<std::string>& cells, std::size_t width, const char* section) const {
        if (cells.size() != width)
            throw ParseError(file_, pos_, 0,
                             std::string("ragged row in ") + section + ": expected " + std::to_string(width) +
                                 " cells, found " + std::to_string(cells.size()));
    }

private:
    std::string file_;
    std::vector<std::string> lines_;
    std::size_t pos_ = 0;
};

std::vector<std::string> read_codes(RowReader& reader, std::size_t count, const char* what) {
    auto cells = reader.next(what);
    reader.expect_width(cells, count, what);
    std::set<std::string> seen;
    std::vector<std::string> codes;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto code = io::trim(cells[c]);
        if (code.empty()) throw ParseError(reader.file(), reader.line_no(), c + 1, std::string("empty ") + what + " code");
        if (!seen.insert(code).second)
            throw ParseError(reader.file(), reader.line_no(), c + 1, std::string("duplicate ") + what + " code '" + code + "'");
        codes.push_back(code);
    }
    return codes;
}

double relative_gap(double actual, double accounted) {
    const double gap = std::abs(actual - accounted);
    if (accounted != 0.0) return gap / std::abs(accounted);
    return actual == 0.0 ? 0.0 : 1.0;
}

struct Inverse {
    Eigen::MatrixXd inv;
    double condition = 1.0;
    double residual = 0.0;
    bool refined = false;
};

// Inverts I - a with a residual check and at most one refinement pass.
Inverse leontief_inverse(const Eigen::MatrixXd& a, const std::string& what) {
    const auto n = a.rows();
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - a;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const double rcond = lu.rcond();
    Inverse out;
    out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!std::isfinite(out.condition) || out.condition > tolerance::kMaxCondition) {
        std::ostringstream msg;
        msg << what << ": I - A is singular or near-singular (1-norm condition estimate " << out.condition
            << " > " << tolerance::kMaxCondition << "); the spectral radius of A is not safely below 1";
        throw NumericalError(msg.str());
    }
    out.inv = lu.inverse();
    auto residual = [&] {
        return (out.inv * m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    };
    out.residual = n > 0 ? residual() : 0.0;
    if (!(out.residual <= tolerance::kLeontiefResidual)) {
        out.inv += out.inv * (Eigen::MatrixXd::Identity(n, n) - m * out.inv);
        out.refined = true;
        out.residual = residual();
        if (!(out.residual <= tolerance::kLeontiefResidual)) {
            std::ostringstream msg;
            msg << what << ": residual max|B(I - A) - I| = " << out.residual << " exceeds "
                << tolerance::kLeontiefResidual << " after refinement";
            throw NumericalError(msg.str());
        }
    }
    return out;
}

}  // namespace

std::size_t MrioTable::country_index(const std::string& code) const { return find_code(countries, code, "country"); }
std::size_t MrioTable::sector_index(const std::string& code) const { return find_code(sectors, code, "sector"); }

MrioTable load_mrio(const std::filesystem::path& path, MrioFormat format) {
    if (format != MrioFormat::CanonicalV1) throw InvalidInput("unsupported MRIO format");
    RowReader reader(path);
    MrioTable t;

    auto header = reader.next("header");
    if (header.size() != 3) throw ParseError(reader.file(), 1, 0, "malformed header: expected 'year,G,N'");
    auto year = io::parse_int(header[0]);
    auto g = io::parse_int(header[1]);
    auto n = io::parse_int(header[2]);
    if (!year) throw ParseError(reader.file(), 1, 1, "malformed header: year '" + header[0] + "'");
    if (!g || *g < 1) throw ParseError(reader.file(), 1, 2, "malformed header: country count '" + header[1] + "'");
    if (!n || *n < 1) throw ParseError(reader.file(), 1, 3, "malformed header: sector count '" + header[2] + "'");
    t.year = static_cast<int>(*year);
    const auto G = static_cast<std::size_t>(*g);
    const auto N = static_cast<std::size_t>(*n);
    const auto D = G * N;

    t.countries = read_codes(reader, G, "country");
    t.sectors = read_codes(reader, N, "sector");

    t.intermediate.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
    for (std::size_t i = 0; i < D; ++i) {
        auto cells = reader.next("Z");
        reader.expect_width(cells, D, "Z");
        for (std::size_t j = 0; j < D; ++j) t.intermediate(i, j) = reader.number(cells, j);
    }
    t.final_demand.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(G));
    for (std::size_t i = 0; i < D; ++i) {
        auto cells = reader.next("Y");
        reader.expect_width(cells, G, "Y");
        for (std::size_t j = 0; j < G; ++j) t.final_demand(i, j) = reader.number(cells, j);
    }
    auto read_vector = [&](const char* section) {
        auto cells = reader.next(section);
        reader.expect_width(cells, D, section);
        Eigen::VectorXd v(static_cast<Eigen::Index>(D));
        for (std::size_t j = 0; j < D; ++j) v(j) = reader.number(cells, j);
        return v;
    };
    t.value_added = read_vector("VA");
    t.output = read_vector("X");
    if (!reader.done()) throw ParseError(reader.file(), reader.line_no() + 1, 0, "unexpected trailing rows");
    return t;
}

void write_mrio(const MrioTable& t, const std::filesystem::path& path) {
    std::string out;
    auto join = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out.push_back(',');
            out += cells[k];
        }
        out.push_back('\n');
    };
    auto numbers = [&](const auto& row) {
        for (Eigen::Index k = 0; k < row.size(); ++k) {
            if (k) out.push_back(',');
            out += io::format_double(row(k));
        }
        out.push_back('\n');
    };
    out += std::to_string(t.year) + "," + std::to_string(t.num_countries()) + "," + std::to_string(t.num_sectors()) + "\n";
    join(t.countries);
    join(t.sectors);
    for (Eigen::Index i = 0; i < t.intermediate.rows(); ++i) numbers(t.intermediate.row(i));
    for (Eigen::Index i = 0; i < t.final_demand.rows(); ++i) numbers(t.final_demand.row(i));
    numbers(t.value_added);
    numbers(t.output);
    io::write_file_atomic(path, out);
}

bool ValidationReport::passed() const {
    return std::none_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::Violation; });
}

std::vector<Finding> ValidationReport::violations() const {
    std::vector<Finding> out;
    std::copy_if(findings.begin(), findings.end(), std::back_inserter(out),
                 [](const Finding& f) { return f.severity == Severity::Violation; });
    return out;
}

std::vector<Finding> ValidationReport::warnings() const {
    std::vector<Finding> out;
    std::copy_if(findings.begin(), findings.end(), std::back_inserter(out),
                 [](const Finding& f) { return f.severity == Severity::Warning; });
    return out;
}

ValidationReport validate_mrio(const MrioTable& t) {
    ValidationReport report;
    auto add = [&](Severity sev, std::string check, std::ptrdiff_t row, std::ptrdiff_t col, double magnitude,
                   std::string message) {
        report.findings.push_back({sev, std::move(check), row, col, magnitude, std::move(message)});
    };

    const auto G = t.num_countries();
    const auto N = t.num_sectors();
    const auto D = static_cast<Eigen::Index>(G * N);
    if (G < 2) add(Severity::Violation, "country_count", -1, -1, double(G), "at least two countries required");
    if (N < 1) add(Severity::Violation, "sector_count", -1, -1, double(N), "at least one sector required");
    for (const auto* codes : {&t.countries, &t.sectors}) {
        std::set<std::string> seen;
        for (const auto& c : *codes)
            if (!seen.insert(c).second) add(Severity::Violation, "duplicate_code", -1, -1, 0.0, "duplicate code '" + c + "'");
    }
    if (t.intermediate.rows() != D || t.intermediate.cols() != D || t.final_demand.rows() != D ||
        t.final_demand.cols() != static_cast<Eigen::Index>(G) || t.value_added.size() != D || t.output.size() != D) {
        add(Severity::Violation, "dimensions", -1, -1, 0.0, "matrix dimensions do not match G x N");
        return report;
    }

    auto finite_check = [&](const auto& m, const char* name) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                if (!std::isfinite(m(i, j)))
                    add(Severity::Violation, std::string("non_finite_") + name, i, j, m(i, j), std::string(name) + " cell is not finite");
    };
    finite_check(t.intermediate, "Z");
    finite_check(t.final_demand, "Y");
    finite_check(t.value_added, "VA");
    finite_check(t.output, "X");
    if (!report.passed()) return report;

    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index j = 0; j < D; ++j)
            if (t.intermediate(i, j) < 0.0)
                add(Severity::Violation, "negative_intermediate", i, j, t.intermediate(i, j), "negative Z entry");
    for (Eigen::Index j = 0; j < D; ++j) {
        if (t.value_added(j) < 0.0) add(Severity::Violation, "negative_value_added", -1, j, t.value_added(j), "negative VA entry");
        if (t.output(j) < 0.0) add(Severity::Violation, "negative_output", -1, j, t.output(j), "negative gross output");
    }
    for (Eigen::Index i = 0; i < D; ++i)
        for (Eigen::Index u = 0; u < static_cast<Eigen::Index>(G); ++u)
            if (t.final_demand(i, u) < 0.0)
                add(Severity::Warning, "negative_final_demand", i, u, t.final_demand(i, u),
                    "negative final demand (inventory drawdown)");
    for (Eigen::Index u = 0; u < static_cast<Eigen::Index>(G); ++u) {
        const double s = t.final_demand.col(u).sum();
        if (s < 0.0) add(Severity::Violation, "final_demand_column_sum", -1, u, s, "final-demand column sums to a negative value");
    }

    const Eigen::RowVectorXd z_cols = t.intermediate.colwise().sum();
    const Eigen::VectorXd z_rows = t.intermediate.rowwise().sum();
    const Eigen::VectorXd y_rows = t.final_demand.rowwise().sum();
    for (Eigen::Index j = 0; j < D; ++j) {
        const double rel = relative_gap(t.output(j), z_cols(j) + t.value_added(j));
        if (rel > tolerance::kBalanceRelative)
            add(Severity::Violation, "column_balance", -1, j, rel, "X != column sum of Z + VA");
    }
    for (Eigen::Index i = 0; i < D; ++i) {
        const double rel = relative_gap(t.output(i), z_rows(i) + y_rows(i));
        if (rel > tolerance::kBalanceRelative)
            add(Severity::Violation, "row_balance", i, -1, rel, "X != row sum of Z + row sum of Y");
    }
    return report;
}

CoefMatrices coefficients(const MrioTable& t) {
    const auto G = t.num_countries();
    const auto N = t.num_sectors();
    const auto D = static_cast<Eigen::Index>(G * N);
    if (t.intermediate.rows() != D || t.intermediate.cols() != D || t.output.size() != D)
        throw InvalidInput("coefficients: table dimensions do not match G x N");

    CoefMatrices c;
    c.input_coef = Eigen::MatrixXd::Zero(D, D);
    c.va_coef = Eigen::RowVectorXd::Zero(D);
    for (Eigen::Index j = 0; j < D; ++j) {
        if (t.output(j) > 0.0) {
            c.input_coef.col(j) = t.intermediate.col(j) / t.output(j);
            c.va_coef(j) = 1.0 - c.input_coef.col(j).sum();
        }
    }

    auto global = leontief_inverse(c.input_coef, "global Leontief inverse");
    c.leontief = std::move(global.inv);
    c.condition_estimate = global.condition;
    c.leontief_residual = global.residual;
    c.refined = global.refined;

    c.local.reserve(G);
    for (std::size_t s = 0; s < G; ++s) {
        auto local = leontief_inverse(block(c.input_coef, s, s, N), "local Leontief inverse of " + t.countries[s]);
        c.local_residual = std::max(c.local_residual, local.residual);
        c.refined = c.refined || local.refined;
        c.local.push_back(std::move(local.inv));
    }

    const auto n = static_cast<Eigen::Index>(N);
    c.origin_content.resize(static_cast<Eigen::Index>(G), D);
    for (std::size_t s = 0; s < G; ++s) {
        const auto off = static_cast<Eigen::Index>(s * N);
        c.origin_content.row(static_cast<Eigen::Index>(s)) = c.va_coef.segment(off, n) * c.leontief.middleRows(off, n);
    }
    return c;
}

MrioTable synth_mrio(const SynthMrioSpec& spec) {
    if (spec.countries < 2) throw InvalidInput("synth_mrio: at least two countries required");
    if (spec.sectors < 1) throw InvalidInput("synth_mrio: at least one sector required");
    if (!(spec.max_column_sum > 0.0 && spec.max_column_sum < 1.0))
        throw InvalidInput("synth_mrio: max_column_sum must lie in (0, 1)");

    const auto G = spec.countries;
    const auto N = spec.sectors;
    const auto D = static_cast<Eigen::Index>(G * N);
    detail::Rng rng(spec.seed);

    MrioTable t;
    t.year = spec.year;
    if (spec.country_codes) {
        if (spec.country_codes->size() != G) throw InvalidInput("synth_mrio: country code count mismatch");
        t.countries = *spec.country_codes;
    } else {
        for (std::size_t c = 0; c < G; ++c) {
            if (G <= kSyntheticCountries.size() + 1 && c + 1 == G && G > kSyntheticCountries.size())
                t.countries.push_back("ROW");
            else if (c < kSyntheticCountries.size())
                t.countries.push_back(kSyntheticCountries[c]);
            else
                t.countries.push_back("R" + std::to_string(c));
        }
    }
    if (spec.sector_codes) {
        if (spec.sector_codes->size() != N) throw InvalidInput("synth_mrio: sector code count mismatch");
        t.sectors = *spec.sector_codes;
    } else {
        for (std::size_t i = 0; i < N; ++i) t.sectors.push_back("C" + std::to_string(i + 1));
    }

    // Input coefficients, column by column: sparse positive weights scaled to a target column sum.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(D, D);
    for (Eigen::Index j = 0; j < D; ++j) {
        const auto buyer = static_cast<std::size_t>(j) / N;
        const double target = rng.uniform(0.25, spec.max_column_sum);
        double total = 0.0;
        for (Eigen::Index i = 0; i < D; ++i) {
            const bool domestic = static_cast<std::size_t>(i) / N == buyer;
            if (!rng.bernoulli(spec.density)) {
                rng.uniform();  // keep the stream aligned across densities
                continue;
            }
            const double w = rng.uniform(0.1, 1.0) * (domestic ? 3.0 : 1.0);
            a(i, j) = w;
            total += w;
        }
        if (total > 0.0) {
            a.col(j) *= target / total;
            double col_sum = 0.0;
            for (Eigen::Index i = 0; i < D; ++i) {
                if (static_cast<std::size_t>(i) / N != buyer) a(i, j) *= spec.foreign_scale;
                col_sum += a(i, j);
            }
            if (col_sum > spec.max_column_sum) a.col(j) *= spec.max_column_sum / col_sum;
        }
    }

    t.final_demand.resize(D, static_cast<Eigen::Index>(G));
    for (Eigen::Index i = 0; i < D; ++i) {
        const auto origin = static_cast<std::size_t>(i) / N;
        for (std::size_t u = 0; u < G; ++u)
            t.final_demand(i, static_cast<Eigen::Index>(u)) = 100.0 * rng.uniform(0.5, 1.5) * (origin == u ? 4.0 : 1.0);
    }
    if (spec.inventory) {
        // One small drawdown in an exporting row; row and column sums stay positive.
        const auto i = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(D)) % D;
        const auto origin = static_cast<std::size_t>(i) / N;
        const auto u = static_cast<Eigen::Index>((origin + 1) % G);
        t.final_demand(i, u) = -0.05 * t.final_demand(i, u);
    }

    const Eigen::VectorXd y = t.final_demand.rowwise().sum();
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(D, D) - a;
    t.output = m.partialPivLu().solve(y);
    t.intermediate = a * t.output.asDiagonal();
    t.value_added = t.output - t.intermediate.colwise().sum().transpose();
    return t;
}

}  // namespace gvckit
