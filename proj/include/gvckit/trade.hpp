#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace gvckit {

enum class Flow { Export, Import };

Flow parse_flow(const std::string& text);  // "X" / "M"
const char* flow_code(Flow flow);

// Months since January 2016; negative before.
int month_index(int year, int month);
int month_year(int index);
int month_of_year(int index);  // 1..12
std::string month_label(int index);  // "2018-10"
int parse_month_label(const std::string& text);

struct TradeRecord {
    std::string reporter;
    std::string partner;
    Flow flow = Flow::Export;
    std::string hs2;
    int year = 0;
    int month = 1;
    double value = 0.0;

    bool operator==(const TradeRecord&) const = default;
};

struct TradeLoad {
    std::vector<TradeRecord> records;  // sorted by key
    std::vector<std::string> warnings;
};

TradeLoad load_trades(const std::filesystem::path& path);
void write_trades(const std::vector<TradeRecord>& records, const std::filesystem::path& path);

// Partner code for a reporter's world-total row; it is never treated as a partner.
inline const std::string kWorldPartner = "WLD";

/// HS 2-digit chapter to sector name.
class SectorMap {
public:
    SectorMap() = default;
    explicit SectorMap(std::map<std::string, std::string> chapters);

    // All 97 chapters over the nine default sectors.
    static SectorMap default_map();
    static SectorMap load(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;

    std::optional<std::string> lookup(const std::string& hs2) const;
    std::vector<std::string> sector_names() const;  // sorted, distinct
    const std::map<std::string, std::string>& chapters() const { return chapters_; }

private:
    std::map<std::string, std::string> chapters_;
};

const std::vector<std::string>& default_sector_names();

struct SectorRecord {
    std::string reporter;
    std::string partner;
    Flow flow = Flow::Export;
    std::string sector;
    int year = 0;
    int month = 1;
    double value = 0.0;
};

// Aggregates chapters into sectors; output sorted by (reporter, partner, flow, sector, year, month).
std::vector<SectorRecord> apply_sector_map(const std::vector<TradeRecord>& records, const SectorMap& map);

struct ControlRow {
    double pop_growth = 0.0;
    double gdp_pc_growth = 0.0;
    double geo_dist = 0.0;
    double socio_cond = 0.0;
    double invest_profile = 0.0;
};

// (country, year) -> annual controls.
using Controls = std::map<std::pair<std::string, int>, ControlRow>;

Controls load_controls(const std::filesystem::path& path);
void write_controls(const Controls& controls, const std::filesystem::path& path);

struct PanelObservation {
    std::string partner;
    int t = 0;
    std::string sector;
    double share = 0.0;  // percentage points
    double pop_growth_lag = 0.0;
    double gdp_pc_growth_lag = 0.0;
    double geo_dist = 0.0;
    double socio_cond = 0.0;
    double invest_profile = 0.0;
    bool imputed = false;  // trade cell absent in the input, share set to zero
};

enum class Denominator { Included, World };

Denominator parse_denominator(const std::string& text);
const char* denominator_name(Denominator d);

struct Panel {
    std::string reporter;
    Flow flow = Flow::Export;
    Denominator denominator = Denominator::Included;
    std::vector<std::string> partners;  // sorted
    std::vector<std::string> sectors;   // sorted
    int first_t = 0;
    int last_t = 0;
    // Sorted by (sector, partner, t); balanced over partners x sectors x [first_t, last_t].
    std::vector<PanelObservation> rows;
    std::size_t imputed_zeros = 0;
    std::size_t zero_denominator_cells = 0;

    // Stable content hash (hex) of the rows, for run metadata.
    std::string content_hash() const;
};

struct PanelOptions {
    Denominator denominator = Denominator::Included;
    // Restricts partners; empty = every partner observed for the reporter/flow.
    std::vector<std::string> partners;
};

Panel build_panel(const std::vector<SectorRecord>& records, const Controls& controls, const std::string& reporter,
                  Flow flow, const PanelOptions& options = {});
Panel build_panel(const std::vector<SectorRecord>& records, const std::filesystem::path& controls_path,
                  const std::string& reporter, Flow flow, const PanelOptions& options = {});

enum class Granularity { Month, Quarter };

struct DeviationPoint {
    std::string period;  // "2019-03" or "2019-Q1"
    double deviation = 0.0;
    bool defined = true;
};

struct DeviationSeries {
    std::string reporter;
    Flow flow = Flow::Export;
    Granularity granularity = Granularity::Month;
    std::vector<DeviationPoint> points;
};

// Deviation of each month's total trade value from the mean of the same calendar month over
// 2016-2017; quarters average their months.
DeviationSeries deviation_series(const std::vector<TradeRecord>& records, const std::string& reporter, Flow flow,
                                 Granularity granularity);

struct PlantedEffect {
    std::string partner;
    std::string sector;
    int start_t = 0;
    double magnitude = 0.0;  // percentage points added to the partner's share
};

struct SynthPanelSpec {
    std::string reporter = "CHN";
    Flow flow = Flow::Export;
    std::vector<std::string> partners;
    std::vector<std::string> sectors;
    int months = 96;  // starting January 2016
    std::uint64_t seed = 1;
    std::vector<PlantedEffect> effects;
    double noise_sd = 0.0;
    // Annual control paths: per-partner level plus slope and a sinusoid of this amplitude.
    double control_wiggle = 0.5;
    double sector_trade_level = 1.0e4;
};

struct SynthPanel {
    std::vector<TradeRecord> records;
    Controls controls;
    // Realised shares keyed by (sector, partner, t), the values build_panel must reproduce.
    std::map<std::tuple<std::string, std::string, int>, double> true_shares;
    // Noise-free share path before the planted effects.
    std::map<std::pair<std::string, std::string>, double> baseline_shares;
    std::size_t clipped_cells = 0;
    SynthPanelSpec spec;
};

SynthPanel synth_panel(const SynthPanelSpec& spec);

// Representative HS chapter used when synthesising records for a sector.
std::string representative_chapter(const std::string& sector);

// Structured text sidecar with seed, effects and generator parameters.
std::string ground_truth_text(const SynthPanelSpec& spec);
SynthPanelSpec parse_ground_truth(const std::string& text);

}  // namespace gvckit
