#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "xdrmob/core.hpp"
#include "xdrmob/ingest.hpp"

namespace xdrmob {

inline constexpr unsigned kDefaultMinNightEvents = 3;
inline constexpr int kNightStartSecond = 22 * 3600;
inline constexpr int kNightEndSecond = 7 * 3600;

/// Local date on which the night containing `utc_seconds` started, if the
/// event falls in a night window [22:00, 07:00) that started Monday..Friday
/// on a day inside the study window. Post-midnight hours belong to the
/// previous day's night.
std::optional<Date> weekday_night_of(std::int64_t utc_seconds, const StudyWindow& window) noexcept;

std::vector<XdrEvent> night_weekday_filter(std::span<const XdrEvent> events, const StudyWindow& window);

/// Home comuna for one device-week: comuna of the most-used antenna, ties to
/// the smallest antenna id. Absent when fewer than `min_events` events.
std::optional<ComunaId> weekly_home(std::span<const XdrEvent> night_events, const AntennaRegistry& registry,
                                    unsigned min_events = kDefaultMinNightEvents);

struct HomeSeries {
    DeviceId device_id = 0;
    std::map<Date, std::optional<ComunaId>> weekly_home;  // keyed by the week's Monday
    std::optional<ComunaId> baseline_home;
    std::optional<ComunaId> november_home;

    std::optional<ComunaId> home_in_week(Date week) const;
};

/// Fills baseline_home and november_home from an already populated weekly map.
/// november_home needs at least two of the four November weeks resolved.
void resolve_reference_homes(HomeSeries& series, const StudyWindow& window);

HomeSeries build_home_series(DeviceId device, std::span<const XdrEvent> device_events, const StudyWindow& window,
                             const AntennaRegistry& registry, unsigned min_events = kDefaultMinNightEvents);

/// `device_id,week_start,comuna_id` rows for every resolved week.
inline constexpr std::string_view kWeeklyHomeCsvHeader = "device_id,week_start,comuna_id";
/// `device_id,baseline_home,november_home`; absent homes are empty fields.
inline constexpr std::string_view kHomeSummaryCsvHeader = "device_id,baseline_home,november_home";

/// Streams home series to the audit/summary CSVs.
class HomeSeriesWriter {
public:
    HomeSeriesWriter(const std::filesystem::path& weekly_path, const std::filesystem::path& summary_path,
                     std::string_view preamble = {});
    void write(const HomeSeries& series);
    void close();

private:
    std::ofstream weekly_;
    std::ofstream summary_;
};

/// Reads the two CSVs back. Series are ordered by device id.
std::vector<HomeSeries> load_home_series(const std::filesystem::path& weekly_path,
                                         const std::filesystem::path& summary_path, const StudyWindow& window);

}  // namespace xdrmob
