#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xdrmob/core.hpp"
#include "xdrmob/home_inference.hpp"
#include "xdrmob/ingest.hpp"

namespace xdrmob {

struct DayTrips {
    std::uint64_t internal = 0;
    std::uint64_t external = 0;
};

/// Trips in one device-day: every consecutive event pair on different
/// antennas. Internal when both antennas sit in the same comuna. Pairs with
/// an unresolvable antenna are ignored.
DayTrips count_trips(std::span<const XdrEvent> day_events, const AntennaRegistry& registry);

struct TripCounts {
    ComunaId comuna_id = 0;
    Date date;
    std::uint64_t internal_trips = 0;
    std::uint64_t external_trips = 0;
    std::uint64_t active_devices = 0;

    friend bool operator==(const TripCounts&, const TripCounts&) = default;
};

/// Per comuna-day sums over devices. Integer sums, so merging partial
/// accumulators in any order gives the same result.
class TripAccumulator {
public:
    explicit TripAccumulator(const StudyWindow& window);

    /// One active device homed in `home` on local day `day`.
    void add(ComunaId home, Date day, DayTrips trips);
    /// Splits a device's time-sorted events by local date and attributes each
    /// day to the device's home in that week. Days without an inferred home
    /// are skipped.
    void add_device(const HomeSeries& homes, std::span<const XdrEvent> events, const AntennaRegistry& registry);
    void merge(const TripAccumulator& other);

    /// Rows with at least one active device, ordered by (comuna, date).
    std::vector<TripCounts> counts() const;

private:
    struct Cell {
        std::uint64_t internal = 0;
        std::uint64_t external = 0;
        std::uint64_t active = 0;
    };

    StudyWindow window_;
    std::size_t num_days_;
    std::map<ComunaId, std::vector<Cell>> cells_;
};

struct IndexDay {
    Date date;
    std::optional<double> im_internal;
    std::optional<double> im_external;
    std::optional<double> im_total;  // im_internal + im_external
    std::optional<double> change_internal;
    std::optional<double> change_external;
    std::optional<double> change_total;
};

struct IndexSeries {
    ComunaId comuna_id = 0;
    std::vector<IndexDay> days;  // every window day, in order
    std::optional<double> baseline_internal;
    std::optional<double> baseline_external;
    std::optional<double> baseline_total;
    /// No active device on any baseline day.
    bool no_baseline = false;
    /// Mean of -change_total over days where it is defined.
    std::optional<double> mean_reduction;
};

/// Indices are trips per active device. Baselines are the mean index over the
/// baseline week; change = 100 * (index - baseline) / baseline and is absent
/// when the baseline is absent or zero.
std::vector<IndexSeries> build_index_series(std::span<const TripCounts> counts, const StudyWindow& window);

struct StratifiedChange {
    ComunaId comuna_id = 0;
    std::optional<double> quarantine_mean;
    std::optional<double> free_mean;
    std::size_t days_q = 0;
    std::size_t days_free = 0;
};

/// Mean change_total over quarantined versus free days of each comuna.
StratifiedChange stratify_by_quarantine(const IndexSeries& series, const QuarantineSchedule& schedule);

inline constexpr std::string_view kTripCountsCsvHeader = "comuna,date,internal_trips,external_trips,active_devices";
inline constexpr std::string_view kIndexDailyCsvHeader =
    "comuna,date,im_internal,im_external,im_total,change_internal,change_external,change_total";
inline constexpr std::string_view kIndexSummaryCsvHeader =
    "comuna,mean_reduction,quarantine_mean,free_mean,days_q,days_free";

struct IndexSummaryRow {
    ComunaId comuna_id = 0;
    std::optional<double> mean_reduction;
    std::optional<double> quarantine_mean;
    std::optional<double> free_mean;
    std::size_t days_q = 0;
    std::size_t days_free = 0;
};

std::vector<IndexSummaryRow> summarize(std::span<const IndexSeries> series, const QuarantineSchedule& schedule);

void write_trip_counts(const std::filesystem::path& path, std::span<const TripCounts> counts,
                       std::string_view preamble = {});
std::vector<TripCounts> load_trip_counts(const std::filesystem::path& path);
void write_index_daily(const std::filesystem::path& path, std::span<const IndexSeries> series,
                       std::string_view preamble = {});
void write_index_summary(const std::filesystem::path& path, std::span<const IndexSummaryRow> rows,
                         std::string_view preamble = {});
std::vector<IndexSummaryRow> load_index_summary(const std::filesystem::path& path);

}  // namespace xdrmob
