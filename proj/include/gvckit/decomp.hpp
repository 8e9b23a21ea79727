#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gvckit/mrio.hpp"

namespace gvckit {

inline constexpr std::size_t kNumGroups = 8;

// Labels of the eight value-added groups, in G1..G8 order.
const std::array<std::string, kNumGroups>& group_labels();

/// Grouped value-added decomposition of the gross exports from `exporter` to `importer`.
///
/// All vectors are indexed by the exporter's sectors. The groups collect the
/// sixteen-term split as
///   G1 = T1, G2 = T2, G3 = T3..T5, G4 = T6..T8, G5 = T9..T10,
///   G6 = T11..T12, G7 = T13..T14, G8 = T15..T16
/// and sum to `exports` entrywise.
struct DecompGroups {
    std::string exporter;
    std::string importer;
    int year = 0;
    std::vector<std::string> sectors;
    Eigen::VectorXd exports;
    std::array<Eigen::VectorXd, kNumGroups> groups;

    const Eigen::VectorXd& group(std::size_t one_based) const { return groups.at(one_based - 1); }
    Eigen::VectorXd total() const;
    Eigen::VectorXd domestic_content() const;  // G1..G5
    Eigen::VectorXd foreign_content() const;   // G6..G8
};

struct GvcIndices {
    double forward_share = 0.0;
    double backward_share = 0.0;
    double participation = 0.0;
    double position = 0.0;
    std::vector<std::string> sector_subset;
    bool defined = false;
};

// E^{sr} = A^{sr} X^r + Y^{sr}.
Eigen::VectorXd gross_exports(const MrioTable& table, const CoefMatrices& coef, const std::string& exporter,
                              const std::string& importer);

DecompGroups decompose(const MrioTable& table, const CoefMatrices& coef, const std::string& exporter,
                       const std::string& importer);

// Every ordered pair s != r, sorted by (exporter, importer) code. Pair jobs fan out over
// `threads` workers (0 = hardware concurrency); output does not depend on the thread count.
std::vector<DecompGroups> decompose_all(const MrioTable& table, const CoefMatrices& coef, unsigned threads = 0);

GvcIndices indices(const DecompGroups& groups, const std::vector<std::string>& sector_subset);

struct YearIndices {
    int year = 0;
    GvcIndices value;
};

std::vector<YearIndices> indices_series(const std::vector<MrioTable>& tables, const std::string& exporter,
                                        const std::string& importer, const std::vector<std::string>& sector_subset);

// A named sector subset, e.g. {"C3-C16", {"C3", ..., "C16"}}.
struct SectorGroup {
    std::string name;
    std::vector<std::string> sectors;
};

// Parses "name:C3..C16" / "name:C1|C4|C7" / "name:*" against the table's sector codes.
// A range keeps the codes with the same alphabetic prefix whose numeric suffix lies in range.
SectorGroup parse_sector_group(const std::string& text, const std::vector<std::string>& sectors);

// CSV emission (17 significant digits). Rows are appended to an open stream so that
// multi-year runs produce a single file.
void write_decomp_header(std::ostream& out);
void write_decomp_rows(std::ostream& out, const DecompGroups& groups);
void write_indices_header(std::ostream& out);
void write_indices_row(std::ostream& out, int year, const std::string& exporter, const std::string& importer,
                       const std::string& sector_group, const GvcIndices& idx);

}  // namespace gvckit
