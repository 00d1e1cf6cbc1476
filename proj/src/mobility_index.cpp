#include "xdrmob/mobility_index.hpp"

#include "xdrmob/csv.hpp"

namespace xdrmob {

namespace {

std::string format_optional(const std::optional<double>& v)
{
    return v ? csv::format_double(*v) : std::string{};
}

std::optional<double> parse_optional(csv::TableReader& reader, const std::string& text)
{
    if (text.empty()) {
        return std::nullopt;
    }
    auto v = csv::parse_number<double>(text);
    if (!v) {
        reader.fail(Errc::ValidationError, "bad number '" + text + "'");
    }
    return v;
}

}  // namespace

DayTrips count_trips(std::span<const XdrEvent> day_events, const AntennaRegistry& registry)
{
    DayTrips trips;
    for (std::size_t i = 1; i < day_events.size(); ++i) {
        const AntennaId a = day_events[i - 1].antenna_id;
        const AntennaId b = day_events[i].antenna_id;
        if (a == b) {
            continue;
        }
        const auto ca = registry.comuna_of(a);
        const auto cb = registry.comuna_of(b);
        if (!ca || !cb) {
            continue;
        }
        if (*ca == *cb) {
            ++trips.internal;
        } else {
            ++trips.external;
        }
    }
    return trips;
}

TripAccumulator::TripAccumulator(const StudyWindow& window)
    : window_(window), num_days_(static_cast<std::size_t>(window.num_days()))
{
}

void TripAccumulator::add(ComunaId home, Date day, DayTrips trips)
{
    const auto offset = (day - window_.start()).count();
    if (offset < 0 || static_cast<std::size_t>(offset) >= num_days_) {
        throw Error(Errc::ValidationError, "day " + format_iso_date(day) + " outside the study window");
    }
    auto& days = cells_[home];
    if (days.empty()) {
        days.resize(num_days_);
    }
    Cell& cell = days[static_cast<std::size_t>(offset)];
    cell.internal += trips.internal;
    cell.external += trips.external;
    ++cell.active;
}

void TripAccumulator::add_device(const HomeSeries& homes, std::span<const XdrEvent> events,
                                 const AntennaRegistry& registry)
{
    std::size_t i = 0;
    while (i < events.size()) {
        const Date day = window_.local_date(events[i].timestamp);
        std::size_t j = i + 1;
        while (j < events.size() && window_.local_date(events[j].timestamp) == day) {
            ++j;
        }
        if (window_.contains(day)) {
            if (auto home = homes.home_in_week(StudyWindow::week_of(day))) {
                add(*home, day, count_trips(events.subspan(i, j - i), registry));
            }
        }
        i = j;
    }
}

void TripAccumulator::merge(const TripAccumulator& other)
{
    if (!(other.window_ == window_)) {
        throw Error(Errc::ValidationError, "merging accumulators of different windows");
    }
    for (const auto& [comuna, days] : other.cells_) {
        auto& mine = cells_[comuna];
        if (mine.empty()) {
            mine.resize(num_days_);
        }
        for (std::size_t d = 0; d < num_days_; ++d) {
            mine[d].internal += days[d].internal;
            mine[d].external += days[d].external;
            mine[d].active += days[d].active;
        }
    }
}

std::vector<TripCounts> TripAccumulator::counts() const
{
    std::vector<TripCounts> out;
    for (const auto& [comuna, days] : cells_) {
        for (std::size_t d = 0; d < days.size(); ++d) {
            if (days[d].active == 0) {
                continue;
            }
            out.push_back({comuna, window_.start() + std::chrono::days(static_cast<int>(d)), days[d].internal,
                           days[d].external, days[d].active});
        }
    }
    return out;
}

std::vector<IndexSeries> build_index_series(std::span<const TripCounts> counts, const StudyWindow& window)
{
    const Date baseline_first = window.baseline_week();
    const Date baseline_last = baseline_first + std::chrono::days(6);
    if (!window.contains(baseline_first) || !window.contains(baseline_last)) {
        throw Error(Errc::ValidationError, "baseline week is not inside the study window");
    }
    const auto num_days = static_cast<std::size_t>(window.num_days());

    std::map<ComunaId, IndexSeries> by_comuna;
    for (const auto& tc : counts) {
        if (!window.contains(tc.date)) {
            throw Error(Errc::ValidationError, "trip counts for " + format_iso_date(tc.date) + " outside the window");
        }
        auto [it, fresh] = by_comuna.try_emplace(tc.comuna_id);
        IndexSeries& s = it->second;
        if (fresh) {
            s.comuna_id = tc.comuna_id;
            s.days.resize(num_days);
            for (std::size_t d = 0; d < num_days; ++d) {
                s.days[d].date = window.start() + std::chrono::days(static_cast<int>(d));
            }
        }
        if (tc.active_devices == 0) {
            continue;  // absent index
        }
        IndexDay& day = s.days[static_cast<std::size_t>((tc.date - window.start()).count())];
        const double n = static_cast<double>(tc.active_devices);
        day.im_internal = static_cast<double>(tc.internal_trips) / n;
        day.im_external = static_cast<double>(tc.external_trips) / n;
        day.im_total = *day.im_internal + *day.im_external;
    }

    std::vector<IndexSeries> out;
    out.reserve(by_comuna.size());
    for (auto& [id, s] : by_comuna) {
        double sum_i = 0.0;
        double sum_e = 0.0;
        double sum_t = 0.0;
        std::size_t n = 0;
        for (const auto& day : s.days) {
            if (day.date >= baseline_first && day.date <= baseline_last && day.im_total) {
                sum_i += *day.im_internal;
                sum_e += *day.im_external;
                sum_t += *day.im_total;
                ++n;
            }
        }
        if (n == 0) {
            s.no_baseline = true;
        } else {
            s.baseline_internal = sum_i / static_cast<double>(n);
            s.baseline_external = sum_e / static_cast<double>(n);
            s.baseline_total = sum_t / static_cast<double>(n);
        }
        auto change = [](const std::optional<double>& value, const std::optional<double>& base) {
            return value && base && *base != 0.0 ? std::optional<double>(100.0 * (*value - *base) / *base)
                                                 : std::nullopt;
        };
        double reduction = 0.0;
        std::size_t defined = 0;
        for (auto& day : s.days) {
            day.change_internal = change(day.im_internal, s.baseline_internal);
            day.change_external = change(day.im_external, s.baseline_external);
            day.change_total = change(day.im_total, s.baseline_total);
            if (day.change_total) {
                reduction -= *day.change_total;
                ++defined;
            }
        }
        if (defined > 0) {
            s.mean_reduction = reduction / static_cast<double>(defined);
        }
        out.push_back(std::move(s));
    }
    return out;
}

StratifiedChange stratify_by_quarantine(const IndexSeries& series, const QuarantineSchedule& schedule)
{
    StratifiedChange out;
    out.comuna_id = series.comuna_id;
    double sum_q = 0.0;
    double sum_free = 0.0;
    for (const auto& day : series.days) {
        if (!day.change_total) {
            continue;
        }
        if (schedule.in_quarantine(series.comuna_id, day.date)) {
            sum_q += *day.change_total;
            ++out.days_q;
        } else {
            sum_free += *day.change_total;
            ++out.days_free;
        }
    }
    if (out.days_q > 0) {
        out.quarantine_mean = sum_q / static_cast<double>(out.days_q);
    }
    if (out.days_free > 0) {
        out.free_mean = sum_free / static_cast<double>(out.days_free);
    }
    return out;
}

std::vector<IndexSummaryRow> summarize(std::span<const IndexSeries> series, const QuarantineSchedule& schedule)
{
    std::vector<IndexSummaryRow> rows;
    rows.reserve(series.size());
    for (const auto& s : series) {
        const StratifiedChange st = stratify_by_quarantine(s, schedule);
        rows.push_back({s.comuna_id, s.mean_reduction, st.quarantine_mean, st.free_mean, st.days_q, st.days_free});
    }
    return rows;
}

void write_trip_counts(const std::filesystem::path& path, std::span<const TripCounts> counts,
                       std::string_view preamble)
{
    auto out = csv::open_output(path);
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
    out << kTripCountsCsvHeader << '\n';
    for (const auto& c : counts) {
        out << c.comuna_id << ',' << format_iso_date(c.date) << ',' << c.internal_trips << ',' << c.external_trips
            << ',' << c.active_devices << '\n';
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

std::vector<TripCounts> load_trip_counts(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kTripCountsCsvHeader);
    std::vector<TripCounts> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 5) {
            reader.fail(Errc::SchemaError, "expected 5 fields");
        }
        auto comuna = csv::parse_number<ComunaId>(f[0]);
        auto internal = csv::parse_number<std::uint64_t>(f[2]);
        auto external = csv::parse_number<std::uint64_t>(f[3]);
        auto active = csv::parse_number<std::uint64_t>(f[4]);
        if (!comuna || !internal || !external || !active) {
            reader.fail(Errc::ValidationError, "malformed trip count row");
        }
        Date day;
        try {
            day = parse_iso_date(f[1]);
        } catch (const Error& e) {
            reader.fail(e.code(), e.what());
        }
        out.push_back({*comuna, day, *internal, *external, *active});
    }
    return out;
}

void write_index_daily(const std::filesystem::path& path, std::span<const IndexSeries> series,
                       std::string_view preamble)
{
    auto out = csv::open_output(path);
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
    out << kIndexDailyCsvHeader << '\n';
    for (const auto& s : series) {
        for (const auto& d : s.days) {
            out << s.comuna_id << ',' << format_iso_date(d.date) << ',' << format_optional(d.im_internal) << ','
                << format_optional(d.im_external) << ',' << format_optional(d.im_total) << ','
                << format_optional(d.change_internal) << ',' << format_optional(d.change_external) << ','
                << format_optional(d.change_total) << '\n';
        }
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

void write_index_summary(const std::filesystem::path& path, std::span<const IndexSummaryRow> rows,
                         std::string_view preamble)
{
    auto out = csv::open_output(path);
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
    out << kIndexSummaryCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.comuna_id << ',' << format_optional(r.mean_reduction) << ',' << format_optional(r.quarantine_mean)
            << ',' << format_optional(r.free_mean) << ',' << r.days_q << ',' << r.days_free << '\n';
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

std::vector<IndexSummaryRow> load_index_summary(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kIndexSummaryCsvHeader);
    std::vector<IndexSummaryRow> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 6) {
            reader.fail(Errc::SchemaError, "expected 6 fields");
        }
        IndexSummaryRow r;
        auto comuna = csv::parse_number<ComunaId>(f[0]);
        auto dq = csv::parse_number<std::size_t>(f[4]);
        auto df = csv::parse_number<std::size_t>(f[5]);
        if (!comuna || !dq || !df) {
            reader.fail(Errc::ValidationError, "malformed index summary row");
        }
        r.comuna_id = *comuna;
        r.mean_reduction = parse_optional(reader, f[1]);
        r.quarantine_mean = parse_optional(reader, f[2]);
        r.free_mean = parse_optional(reader, f[3]);
        r.days_q = *dq;
        r.days_free = *df;
        out.push_back(r);
    }
    return out;
}

}  // namespace xdrmob
