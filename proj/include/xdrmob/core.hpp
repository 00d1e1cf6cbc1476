#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdrmob/error.hpp"

namespace xdrmob {

using DeviceId = std::uint64_t;
using AntennaId = std::uint32_t;
using ComunaId = std::uint32_t;
using RegionId = std::uint32_t;
using Date = std::chrono::sys_days;

/// Region code of the metropolitan region that hosts the capital.
inline constexpr RegionId kMetropolitanRegion = 13;

inline constexpr double kEarthRadiusKm = 6371.0088;

/// One anonymized device-to-antenna interaction. Timestamps are UTC epoch seconds.
struct XdrEvent {
    DeviceId device_id = 0;
    std::int64_t timestamp = 0;
    AntennaId antenna_id = 0;

    friend bool operator==(const XdrEvent&, const XdrEvent&) = default;
};

struct Antenna {
    AntennaId antenna_id = 0;
    double latitude = 0.0;
    double longitude = 0.0;
    ComunaId comuna_id = 0;
};

struct ComunaProfile {
    ComunaId comuna_id = 0;
    std::string name;
    RegionId region_id = 0;
    bool in_scl = false;
    double income_decile = 1.0;
    double poverty_pct = 0.0;
    double rurality_pct = 0.0;  // fraction of rural households, in [0, 1]
    double population = 1.0;
    double area_km2 = 1.0;
    std::optional<double> icvu;
    double centroid_lat = 0.0;
    double centroid_lon = 0.0;

    double density() const { return population / area_km2; }
};

/// Mar 1 .. Nov 30 of one year, classified in local time with a fixed UTC offset.
///
/// Weeks are Monday-aligned and identified by their Monday. The baseline week
/// is the N-th week (default second) whose Monday falls in March. The
/// November weeks are the first four weeks whose Monday falls in November;
/// in years where four weeks fit entirely inside November these are exactly
/// those weeks, otherwise the fourth week runs past the window end.
class StudyWindow {
public:
    explicit StudyWindow(int year, int tz_offset_hours = 0, int baseline_week_ordinal = 2);

    int year() const noexcept { return year_; }
    int tz_offset_hours() const noexcept { return tz_offset_hours_; }
    int baseline_week_ordinal() const noexcept { return baseline_ordinal_; }

    Date start() const noexcept { return start_; }
    /// Last day of the window, inclusive.
    Date end() const noexcept { return end_; }
    int num_days() const noexcept;

    Date baseline_week() const noexcept { return baseline_week_; }
    const std::array<Date, 4>& november_weeks() const noexcept { return november_weeks_; }

    /// UTC epoch of local midnight starting Mar 1.
    std::int64_t start_epoch() const noexcept;
    /// UTC epoch of local midnight after Nov 30 (exclusive bound).
    std::int64_t end_epoch() const noexcept;
    /// Mar 1 00:00:00 UTC; the reference point of the binary XDR encoding.
    std::int64_t binary_epoch() const noexcept;

    bool contains(std::int64_t utc_seconds) const noexcept;
    bool contains(Date day) const noexcept { return day >= start_ && day <= end_; }

    std::int64_t to_local(std::int64_t utc_seconds) const noexcept;
    Date local_date(std::int64_t utc_seconds) const noexcept;
    /// Seconds since local midnight, in [0, 86400).
    int local_second_of_day(std::int64_t utc_seconds) const noexcept;
    /// UTC epoch for a local date plus seconds past local midnight.
    std::int64_t to_utc(Date local_day, int second_of_day) const noexcept;

    /// Mondays of every week overlapping the window, in order.
    std::vector<Date> weeks() const;
    std::vector<Date> days() const;
    std::vector<Date> baseline_days() const;

    static Date week_of(Date day) noexcept;

    friend bool operator==(const StudyWindow&, const StudyWindow&) = default;

private:
    int year_;
    int tz_offset_hours_;
    int baseline_ordinal_;
    Date start_;
    Date end_;
    Date baseline_week_;
    std::array<Date, 4> november_weeks_;
};

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date day);
/// 0 = Monday .. 6 = Sunday.
unsigned iso_weekday_index(Date day) noexcept;

/// Most frequent value; ties go to the tied value whose latest occurrence is
/// the most recent (largest index).
ComunaId mode_with_tiebreak(std::span<const ComunaId> values);

double haversine_km(double lat1, double lon1, double lat2, double lon2) noexcept;

}  // namespace xdrmob
