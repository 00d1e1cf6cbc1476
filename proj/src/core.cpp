#include "xdrmob/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace xdrmob {

namespace chr = std::chrono;

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::DegenerateOrigin: return "DegenerateOrigin";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::NoBaseline: return "NoBaseline";
    case Errc::PipelineOrderError: return "PipelineOrderError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

std::int64_t epoch_of(Date day) noexcept
{
    return static_cast<std::int64_t>(day.time_since_epoch().count()) * kSecondsPerDay;
}

}  // namespace

StudyWindow::StudyWindow(int year, int tz_offset_hours, int baseline_week_ordinal)
    : year_(year), tz_offset_hours_(tz_offset_hours), baseline_ordinal_(baseline_week_ordinal)
{
    if (year < 1971 || year > 2100) {
        throw Error(Errc::ValidationError, "window year out of range: " + std::to_string(year));
    }
    if (tz_offset_hours < -14 || tz_offset_hours > 14) {
        throw Error(Errc::ValidationError, "tz offset out of range: " + std::to_string(tz_offset_hours));
    }
    if (baseline_week_ordinal < 1 || baseline_week_ordinal > 4) {
        throw Error(Errc::ValidationError, "baseline week ordinal must be in [1, 4]");
    }
    const chr::year y{year};
    start_ = Date{y / chr::March / 1};
    end_ = Date{y / chr::November / 30};

    const Date march_monday = Date{y / chr::March / chr::Monday[static_cast<unsigned>(baseline_week_ordinal)]};
    baseline_week_ = march_monday;

    for (unsigned i = 0; i < 4; ++i) {
        november_weeks_[i] = Date{y / chr::November / chr::Monday[i + 1]};
    }
}

int StudyWindow::num_days() const noexcept
{
    return static_cast<int>((end_ - start_).count()) + 1;
}

std::int64_t StudyWindow::start_epoch() const noexcept
{
    return epoch_of(start_) - static_cast<std::int64_t>(tz_offset_hours_) * 3600;
}

std::int64_t StudyWindow::end_epoch() const noexcept
{
    return epoch_of(end_ + chr::days{1}) - static_cast<std::int64_t>(tz_offset_hours_) * 3600;
}

std::int64_t StudyWindow::binary_epoch() const noexcept
{
    return epoch_of(start_);
}

bool StudyWindow::contains(std::int64_t utc_seconds) const noexcept
{
    return utc_seconds >= start_epoch() && utc_seconds < end_epoch();
}

std::int64_t StudyWindow::to_local(std::int64_t utc_seconds) const noexcept
{
    return utc_seconds + static_cast<std::int64_t>(tz_offset_hours_) * 3600;
}

Date StudyWindow::local_date(std::int64_t utc_seconds) const noexcept
{
    return Date{chr::days{floor_div(to_local(utc_seconds), kSecondsPerDay)}};
}

int StudyWindow::local_second_of_day(std::int64_t utc_seconds) const noexcept
{
    const std::int64_t local = to_local(utc_seconds);
    return static_cast<int>(local - floor_div(local, kSecondsPerDay) * kSecondsPerDay);
}

std::int64_t StudyWindow::to_utc(Date local_day, int second_of_day) const noexcept
{
    return epoch_of(local_day) + second_of_day - static_cast<std::int64_t>(tz_offset_hours_) * 3600;
}

Date StudyWindow::week_of(Date day) noexcept
{
    return day - chr::days{iso_weekday_index(day)};
}

std::vector<Date> StudyWindow::weeks() const
{
    std::vector<Date> out;
    for (Date w = week_of(start_); w <= end_; w += chr::days{7}) {
        out.push_back(w);
    }
    return out;
}

std::vector<Date> StudyWindow::days() const
{
    std::vector<Date> out;
    out.reserve(static_cast<std::size_t>(num_days()));
    for (Date d = start_; d <= end_; d += chr::days{1}) {
        out.push_back(d);
    }
    return out;
}

std::vector<Date> StudyWindow::baseline_days() const
{
    std::vector<Date> out;
    for (int i = 0; i < 7; ++i) {
        out.push_back(baseline_week_ + chr::days{i});
    }
    return out;
}

unsigned iso_weekday_index(Date day) noexcept
{
    return chr::weekday{day}.iso_encoding() - 1;
}

Date parse_iso_date(std::string_view text)
{
    auto fail = [&]() -> Error {
        return Error(Errc::ValidationError, "invalid ISO-8601 date '" + std::string(text) + "'");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw fail();
    }
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto parse = [&](std::string_view part, auto& value) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc{} || ptr != part.data() + part.size()) {
            throw fail();
        }
    };
    parse(text.substr(0, 4), y);
    parse(text.substr(5, 2), m);
    parse(text.substr(8, 2), d);
    const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
    if (!ymd.ok()) {
        throw fail();
    }
    return Date{ymd};
}

std::string format_iso_date(Date day)
{
    const chr::year_month_day ymd{day};
    char buf[16];
    const int y = static_cast<int>(ymd.year());
    const unsigned m = static_cast<unsigned>(ymd.month());
    const unsigned d = static_cast<unsigned>(ymd.day());
    buf[0] = static_cast<char>('0' + (y / 1000) % 10);
    buf[1] = static_cast<char>('0' + (y / 100) % 10);
    buf[2] = static_cast<char>('0' + (y / 10) % 10);
    buf[3] = static_cast<char>('0' + y % 10);
    buf[4] = '-';
    buf[5] = static_cast<char>('0' + m / 10);
    buf[6] = static_cast<char>('0' + m % 10);
    buf[7] = '-';
    buf[8] = static_cast<char>('0' + d / 10);
    buf[9] = static_cast<char>('0' + d % 10);
    return std::string(buf, 10);
}

ComunaId mode_with_tiebreak(std::span<const ComunaId> values)
{
    if (values.empty()) {
        throw Error(Errc::EmptySeries, "mode of an empty series");
    }
    struct Tally {
        std::size_t count = 0;
        std::size_t last_index = 0;
    };
    std::unordered_map<ComunaId, Tally> tally;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto& t = tally[values[i]];
        ++t.count;
        t.last_index = i;
    }
    ComunaId best = values.front();
    Tally best_tally{};
    for (const auto& [value, t] : tally) {
        if (t.count > best_tally.count || (t.count == best_tally.count && t.last_index > best_tally.last_index)) {
            best = value;
            best_tally = t;
        }
    }
    return best;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) noexcept
{
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = lat1 * deg;
    const double phi2 = lat2 * deg;
    const double dphi = (lat2 - lat1) * deg;
    const double dlambda = (lon2 - lon1) * deg;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace xdrmob
