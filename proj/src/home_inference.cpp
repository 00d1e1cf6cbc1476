#include "xdrmob/home_inference.hpp"

#include <algorithm>
#include <unordered_map>

#include "xdrmob/csv.hpp"

namespace xdrmob {

namespace chr = std::chrono;

std::optional<Date> weekday_night_of(std::int64_t utc_seconds, const StudyWindow& window) noexcept
{
    const int sec = window.local_second_of_day(utc_seconds);
    Date night = window.local_date(utc_seconds);
    if (sec >= kNightStartSecond) {
        // night starts today
    } else if (sec < kNightEndSecond) {
        night -= chr::days{1};
    } else {
        return std::nullopt;
    }
    if (iso_weekday_index(night) > 4 || !window.contains(night)) {
        return std::nullopt;
    }
    return night;
}

std::vector<XdrEvent> night_weekday_filter(std::span<const XdrEvent> events, const StudyWindow& window)
{
    std::vector<XdrEvent> kept;
    for (const auto& e : events) {
        if (weekday_night_of(e.timestamp, window)) {
            kept.push_back(e);
        }
    }
    return kept;
}

namespace {

/// Most-used antenna among sorted ids; ties resolve to the smallest id
/// because the scan only replaces on a strictly larger count.
AntennaId top_antenna(std::span<const AntennaId> sorted_ids)
{
    AntennaId best = sorted_ids.front();
    std::size_t best_count = 0;
    std::size_t i = 0;
    while (i < sorted_ids.size()) {
        std::size_t j = i;
        while (j < sorted_ids.size() && sorted_ids[j] == sorted_ids[i]) {
            ++j;
        }
        if (j - i > best_count) {
            best_count = j - i;
            best = sorted_ids[i];
        }
        i = j;
    }
    return best;
}

ComunaId comuna_or_throw(const AntennaRegistry& registry, AntennaId antenna)
{
    auto comuna = registry.comuna_of(antenna);
    if (!comuna) {
        throw Error(Errc::ValidationError, "antenna " + std::to_string(antenna) + " missing from registry");
    }
    return *comuna;
}

}  // namespace

std::optional<ComunaId> weekly_home(std::span<const XdrEvent> night_events, const AntennaRegistry& registry,
                                    unsigned min_events)
{
    if (night_events.empty() || night_events.size() < min_events) {
        return std::nullopt;
    }
    std::vector<AntennaId> ids;
    ids.reserve(night_events.size());
    for (const auto& e : night_events) {
        ids.push_back(e.antenna_id);
    }
    std::sort(ids.begin(), ids.end());
    return comuna_or_throw(registry, top_antenna(ids));
}

std::optional<ComunaId> HomeSeries::home_in_week(Date week) const
{
    auto it = weekly_home.find(week);
    return it == weekly_home.end() ? std::nullopt : it->second;
}

void resolve_reference_homes(HomeSeries& series, const StudyWindow& window)
{
    series.baseline_home = series.home_in_week(window.baseline_week());
    std::vector<ComunaId> november;
    for (Date w : window.november_weeks()) {
        if (auto h = series.home_in_week(w)) {
            november.push_back(*h);
        }
    }
    series.november_home =
        november.size() >= 2 ? std::optional<ComunaId>(mode_with_tiebreak(november)) : std::nullopt;
}

HomeSeries build_home_series(DeviceId device, std::span<const XdrEvent> device_events, const StudyWindow& window,
                             const AntennaRegistry& registry, unsigned min_events)
{
    HomeSeries series;
    series.device_id = device;
    for (Date w : window.weeks()) {
        series.weekly_home.emplace(w, std::nullopt);
    }

    struct Hit {
        Date week;
        AntennaId antenna;
    };
    std::vector<Hit> hits;
    hits.reserve(device_events.size() / 2);
    for (const auto& e : device_events) {
        if (auto night = weekday_night_of(e.timestamp, window)) {
            hits.push_back({StudyWindow::week_of(*night), e.antenna_id});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.week != b.week ? a.week < b.week : a.antenna < b.antenna;
    });

    std::vector<AntennaId> ids;
    std::size_t i = 0;
    while (i < hits.size()) {
        std::size_t j = i;
        ids.clear();
        while (j < hits.size() && hits[j].week == hits[i].week) {
            ids.push_back(hits[j].antenna);
            ++j;
        }
        if (ids.size() >= min_events && !ids.empty()) {
            series.weekly_home[hits[i].week] = comuna_or_throw(registry, top_antenna(ids));
        }
        i = j;
    }
    resolve_reference_homes(series, window);
    return series;
}

// ---------------------------------------------------------------------------

HomeSeriesWriter::HomeSeriesWriter(const std::filesystem::path& weekly_path,
                                   const std::filesystem::path& summary_path, std::string_view preamble)
    : weekly_(csv::open_output(weekly_path)), summary_(csv::open_output(summary_path))
{
    if (!preamble.empty()) {
        weekly_ << preamble << '\n';
        summary_ << preamble << '\n';
    }
    weekly_ << kWeeklyHomeCsvHeader << '\n';
    summary_ << kHomeSummaryCsvHeader << '\n';
}

void HomeSeriesWriter::write(const HomeSeries& series)
{
    for (const auto& [week, home] : series.weekly_home) {
        if (home) {
            weekly_ << series.device_id << ',' << format_iso_date(week) << ',' << *home << '\n';
        }
    }
    summary_ << series.device_id << ',';
    if (series.baseline_home) {
        summary_ << *series.baseline_home;
    }
    summary_ << ',';
    if (series.november_home) {
        summary_ << *series.november_home;
    }
    summary_ << '\n';
}

void HomeSeriesWriter::close()
{
    weekly_.close();
    summary_.close();
    if (weekly_.fail() || summary_.fail()) {
        throw Error(Errc::IoError, "failed writing home series");
    }
}

std::vector<HomeSeries> load_home_series(const std::filesystem::path& weekly_path,
                                         const std::filesystem::path& summary_path, const StudyWindow& window)
{
    std::vector<HomeSeries> out;
    std::unordered_map<DeviceId, std::size_t> index;
    const auto weeks = window.weeks();
    {
        csv::TableReader reader(summary_path);
        reader.expect_header(kHomeSummaryCsvHeader);
        std::vector<std::string> f;
        while (reader.next(f)) {
            if (f.size() != 3) {
                reader.fail(Errc::SchemaError, "expected 3 fields");
            }
            auto device = csv::parse_number<DeviceId>(f[0]);
            if (!device) {
                reader.fail(Errc::ValidationError, "bad device_id");
            }
            HomeSeries s;
            s.device_id = *device;
            for (Date w : weeks) {
                s.weekly_home.emplace(w, std::nullopt);
            }
            auto opt_id = [&](const std::string& text) -> std::optional<ComunaId> {
                if (text.empty()) {
                    return std::nullopt;
                }
                auto v = csv::parse_number<ComunaId>(text);
                if (!v) {
                    reader.fail(Errc::ValidationError, "bad comuna id '" + text + "'");
                }
                return v;
            };
            s.baseline_home = opt_id(f[1]);
            s.november_home = opt_id(f[2]);
            if (!index.emplace(s.device_id, out.size()).second) {
                reader.fail(Errc::SchemaError, "duplicate device " + f[0]);
            }
            out.push_back(std::move(s));
        }
    }
    {
        csv::TableReader reader(weekly_path);
        reader.expect_header(kWeeklyHomeCsvHeader);
        std::vector<std::string> f;
        while (reader.next(f)) {
            if (f.size() != 3) {
                reader.fail(Errc::SchemaError, "expected 3 fields");
            }
            auto device = csv::parse_number<DeviceId>(f[0]);
            auto comuna = csv::parse_number<ComunaId>(f[2]);
            if (!device || !comuna) {
                reader.fail(Errc::ValidationError, "malformed weekly home row");
            }
            auto it = index.find(*device);
            if (it == index.end()) {
                reader.fail(Errc::ValidationError, "device " + f[0] + " missing from the home summary");
            }
            Date week;
            try {
                week = parse_iso_date(f[1]);
            } catch (const Error& e) {
                reader.fail(e.code(), e.what());
            }
            auto& series = out[it->second];
            auto slot = series.weekly_home.find(week);
            if (slot == series.weekly_home.end()) {
                reader.fail(Errc::ValidationError, "week " + f[1] + " outside the study window");
            }
            slot->second = *comuna;
        }
    }
    std::sort(out.begin(), out.end(), [](const HomeSeries& a, const HomeSeries& b) { return a.device_id < b.device_id; });
    return out;
}

}  // namespace xdrmob
