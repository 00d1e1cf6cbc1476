#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xdrmob/core.hpp"
#include "xdrmob/home_inference.hpp"
#include "xdrmob/ingest.hpp"

namespace xdrmob {

struct MigrationRecord {
    DeviceId device_id = 0;
    ComunaId origin_comuna = 0;       // March home
    ComunaId destination_comuna = 0;  // November modal home
    RegionId origin_region = 0;
    RegionId destination_region = 0;
    bool migrated = false;

    friend bool operator==(const MigrationRecord&, const MigrationRecord&) = default;
};

/// Absent when either reference home is missing. A device migrated iff its
/// November home lies in a different region than its March home.
std::optional<MigrationRecord> classify(const HomeSeries& series, const ComunaTable& comunas);
std::optional<MigrationRecord> classify(DeviceId device, std::optional<ComunaId> baseline_home,
                                        std::optional<ComunaId> november_home, const ComunaTable& comunas);

inline constexpr std::string_view kRecordCsvHeader =
    "device_id,origin_comuna,destination_comuna,origin_region,destination_region,migrated";
void write_records(const std::filesystem::path& path, std::span<const MigrationRecord> records,
                   std::string_view preamble = {});
std::vector<MigrationRecord> load_records(const std::filesystem::path& path);

enum class FlowDirection { Emigration, Immigration };
enum class Level { Comuna, Region };

std::string_view to_string(FlowDirection direction) noexcept;

template <class T>
struct LabeledMatrix {
    std::vector<std::uint32_t> rows;
    std::vector<std::uint32_t> cols;
    std::vector<T> cells;  // row-major

    LabeledMatrix() = default;
    LabeledMatrix(std::vector<std::uint32_t> row_labels, std::vector<std::uint32_t> col_labels)
        : rows(std::move(row_labels)), cols(std::move(col_labels)), cells(rows.size() * cols.size(), T{})
    {
    }

    T& at(std::size_t r, std::size_t c) { return cells[r * cols.size() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return cells[r * cols.size() + c]; }

    std::optional<std::size_t> row_of(std::uint32_t label) const { return index_of(rows, label); }
    std::optional<std::size_t> col_of(std::uint32_t label) const { return index_of(cols, label); }

private:
    static std::optional<std::size_t> index_of(const std::vector<std::uint32_t>& labels, std::uint32_t label);
};

template <class T>
std::optional<std::size_t> LabeledMatrix<T>::index_of(const std::vector<std::uint32_t>& labels, std::uint32_t label)
{
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - labels.begin());
}

using PctMatrix = LabeledMatrix<double>;

/// Migrant counts between origins (rows) and destinations (columns), both
/// label sets sorted ascending.
struct OdMatrix {
    FlowDirection direction = FlowDirection::Emigration;
    Level origin_level = Level::Comuna;
    Level destination_level = Level::Comuna;
    LabeledMatrix<std::uint64_t> counts;
    std::vector<std::uint64_t> origin_base;  // devices homed at each origin in March

    std::uint64_t row_total(std::size_t r) const;
    std::uint64_t total() const;
};

/// Emigration: rows are capital comunas, columns are destinations outside the
/// metropolitan region at `level`. Immigration: rows are origins outside the
/// metropolitan region at `level`, columns are capital comunas. Rows are the
/// eligible origins with a non-zero March base.
OdMatrix build_od(std::span<const MigrationRecord> records, const ComunaTable& comunas, FlowDirection direction,
                  Level level);

/// cell = 100 * count / origin_base. Throws DegenerateOrigin on a zero base.
PctMatrix emigration_pct(const OdMatrix& od);

/// 100 * (immigrants - emigrants) / population.
double net_migration_rate(double immigrants, double emigrants, double population);

/// Re-labels a matrix onto the given sorted label sets, filling zeros.
PctMatrix realign(const PctMatrix& m, const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& cols);
/// Both matrices realigned onto the union of their labels.
std::pair<PctMatrix, PctMatrix> align_union(const PctMatrix& a, const PctMatrix& b);
PctMatrix transpose(const PctMatrix& m);

/// b - a cell by cell; labels must match.
PctMatrix matrix_difference(const PctMatrix& a_pct, const PctMatrix& b_pct);

struct ZScoreFilter {
    std::vector<std::size_t> kept_rows;
    std::vector<double> z;  // same shape as the input
    double mean = 0.0;
    double stddev = 0.0;
};

/// Global standardization over all cells (population std); a row is kept iff
/// one of its cells has z > threshold.
ZScoreFilter zscore_row_filter(const PctMatrix& diff, double threshold = 1.96);

/// Per-origin result with the origins that had to be skipped.
struct OriginValues {
    std::map<std::uint32_t, double> values;
    std::vector<std::uint32_t> skipped;
};

/// Exact 1-Wasserstein distance (km) between each origin's destination
/// distribution in the comparison year and in the base year; the ground
/// metric is the haversine distance between destination centroids.
OriginValues destination_divergence(const PctMatrix& od_year_pct, const PctMatrix& od_base_pct,
                                    const ComunaTable& comunas);

/// Emigrant-weighted mean rurality of each origin's destinations.
OriginValues average_destination_rurality(const PctMatrix& od, const ComunaTable& comunas);
/// Change in average destination rurality between year T and base year T0.
OriginValues rurality_shift(const PctMatrix& od_t_pct, const PctMatrix& od_t0_pct, const ComunaTable& comunas);
OriginValues density_weighted_destination(const PctMatrix& od_pct, const ComunaTable& comunas);
/// Weighted mean ICVU(destination) - ICVU(origin) over ICVU-covered pairs.
OriginValues icvu_tradeoff(const PctMatrix& od_pct, const ComunaTable& comunas);

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

struct RegionProfile {
    RegionId region_id = 0;
    double population = 0.0;
    GeoPoint centroid;  // population-weighted mean of member comuna centroids
};

std::vector<RegionProfile> aggregate_regions(const ComunaTable& comunas);
/// Population-weighted centroid of the capital comunas.
GeoPoint scl_centroid(const ComunaTable& comunas);

struct RegionFlow {
    RegionId region_id = 0;
    std::uint64_t inflow_from_scl = 0;
    double population = 0.0;
    double distance_km = 0.0;
    double gravity_score = 0.0;  // persons per km
};

/// Regions outside the metropolitan region ranked by population / distance to
/// the capital, descending, ties by region id. When `od_region` (emigration at
/// region level) is given, inflows are filled from it.
std::vector<RegionFlow> gravity_rank(std::span<const RegionProfile> regions, GeoPoint scl,
                                     const OdMatrix* od_region = nullptr);

/// Device-to-person expansion factor per comuna: population / March device base.
std::map<ComunaId, double> expansion_factors(std::span<const MigrationRecord> records, const ComunaTable& comunas);

struct HostingImpact {
    RegionId region_id = 0;
    std::uint64_t inflow_devices = 0;
    double inflow_persons = 0.0;
    double population = 0.0;
    double pct = 0.0;
};

/// Share of each destination region's population formed by expanded migrants
/// from the capital. `od_region` must be an emigration matrix at region level.
std::vector<HostingImpact> hosting_impact(const OdMatrix& od_region, std::span<const RegionProfile> regions,
                                          const ComunaTable& comunas);
/// pct(year) - pct(base) for regions present in both.
std::map<RegionId, double> hosting_difference(std::span<const HostingImpact> year, std::span<const HostingImpact> base);

struct NetMigration {
    ComunaId comuna_id = 0;
    std::uint64_t immigrant_devices = 0;
    std::uint64_t emigrant_devices = 0;
    double immigrants = 0.0;  // persons
    double emigrants = 0.0;   // persons
    double population = 0.0;
    double rate = 0.0;
};

/// Per capital comuna migration balance in persons.
std::vector<NetMigration> net_migration_table(std::span<const MigrationRecord> records, const ComunaTable& comunas);

struct MigrationTotals {
    double immigrants = 0.0;
    double emigrants = 0.0;
    double net_flow = 0.0;
    double population = 0.0;
    double rate = 0.0;
};
MigrationTotals capital_totals(std::span<const NetMigration> table);

enum class CensusLevel { RegionsScl, ComunasScl, CountrySclComunas, ComunasSclComunas };
std::string_view to_string(CensusLevel level) noexcept;
CensusLevel parse_census_level(std::string_view text);

using FlowKey = std::pair<std::string, std::string>;

struct DirectionalFlows {
    std::map<FlowKey, double> immigration;
    std::map<FlowKey, double> emigration;
};

/// Model flows (expanded to persons) keyed the same way as census tables:
/// capital aggregate "SCL", rest of the country "COUNTRY", otherwise decimal ids.
DirectionalFlows model_flows(std::span<const MigrationRecord> records, const ComunaTable& comunas, CensusLevel level);

struct CensusCorrelation {
    std::size_t n = 0;
    double r = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

struct CensusReport {
    CensusLevel level = CensusLevel::RegionsScl;
    CensusCorrelation immigration;
    CensusCorrelation emigration;
};

/// Pearson correlation per direction over the census keys; model flows missing
/// for a census key count as zero. Fewer than 3 pairs -> InsufficientData.
CensusReport census_validation(const DirectionalFlows& model, const DirectionalFlows& census, CensusLevel level);

inline constexpr std::string_view kCensusCsvHeader = "level,direction,origin,destination,flow";
std::map<CensusLevel, DirectionalFlows> load_census(const std::filesystem::path& path);

}  // namespace xdrmob
