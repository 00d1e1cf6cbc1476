#include "xdrmob/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include "xdrmob/csv.hpp"

namespace xdrmob {

namespace {

constexpr std::size_t kReadChunk = 1u << 20;
constexpr AntennaId kMaxDenseAntenna = 1u << 24;

std::uint32_t load_u32le(const char* p) noexcept
{
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if constexpr (std::endian::native == std::endian::big) {
        v = __builtin_bswap32(v);
    }
    return v;
}

std::uint64_t load_u64le(const char* p) noexcept
{
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    if constexpr (std::endian::native == std::endian::big) {
        v = __builtin_bswap64(v);
    }
    return v;
}

void store_u32le(char* p, std::uint32_t v) noexcept
{
    if constexpr (std::endian::native == std::endian::big) {
        v = __builtin_bswap32(v);
    }
    std::memcpy(p, &v, 4);
}

void store_u64le(char* p, std::uint64_t v) noexcept
{
    if constexpr (std::endian::native == std::endian::big) {
        v = __builtin_bswap64(v);
    }
    std::memcpy(p, &v, 8);
}

bool valid_lat(double v) { return std::isfinite(v) && v >= -90.0 && v <= 90.0; }
bool valid_lon(double v) { return std::isfinite(v) && v >= -180.0 && v <= 180.0; }

void write_preamble(std::ostream& out, std::string_view preamble)
{
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ComunaTable

void validate_profile(const ComunaProfile& p)
{
    auto bad = [&](const std::string& what) {
        throw Error(Errc::ValidationError, "comuna " + std::to_string(p.comuna_id) + ": " + what);
    };
    if (!(p.income_decile >= 1.0 && p.income_decile <= 10.0)) {
        bad("income_decile out of [1,10]");
    }
    if (!(p.poverty_pct >= 0.0 && p.poverty_pct <= 100.0)) {
        bad("poverty_pct out of [0,100]");
    }
    if (!(p.rurality_pct >= 0.0 && p.rurality_pct <= 1.0)) {
        bad("rurality_pct out of [0,1]");
    }
    if (!(p.population > 0.0) || !std::isfinite(p.population)) {
        bad("population must be positive");
    }
    if (!(p.area_km2 > 0.0) || !std::isfinite(p.area_km2)) {
        bad("area_km2 must be positive");
    }
    if (!std::isfinite(p.density())) {
        bad("density is not finite");
    }
    if (p.icvu && !std::isfinite(*p.icvu)) {
        bad("icvu is not finite");
    }
    if (!valid_lat(p.centroid_lat) || !valid_lon(p.centroid_lon)) {
        bad("centroid out of range");
    }
    if (p.in_scl && p.region_id != kMetropolitanRegion) {
        bad("in_scl comuna outside the metropolitan region");
    }
}

ComunaTable::ComunaTable(std::vector<ComunaProfile> profiles) : profiles_(std::move(profiles))
{
    std::sort(profiles_.begin(), profiles_.end(),
              [](const ComunaProfile& a, const ComunaProfile& b) { return a.comuna_id < b.comuna_id; });
    for (std::size_t i = 0; i < profiles_.size(); ++i) {
        if (i > 0 && profiles_[i].comuna_id == profiles_[i - 1].comuna_id) {
            throw Error(Errc::SchemaError, "duplicate comuna_id " + std::to_string(profiles_[i].comuna_id));
        }
        validate_profile(profiles_[i]);
    }
}

const ComunaProfile* ComunaTable::find(ComunaId id) const noexcept
{
    auto it = std::lower_bound(profiles_.begin(), profiles_.end(), id,
                               [](const ComunaProfile& p, ComunaId v) { return p.comuna_id < v; });
    return (it != profiles_.end() && it->comuna_id == id) ? &*it : nullptr;
}

const ComunaProfile& ComunaTable::at(ComunaId id) const
{
    const ComunaProfile* p = find(id);
    if (p == nullptr) {
        throw Error(Errc::ValidationError, "unknown comuna_id " + std::to_string(id));
    }
    return *p;
}

std::vector<ComunaId> ComunaTable::scl_ids() const
{
    std::vector<ComunaId> ids;
    for (const auto& p : profiles_) {
        if (p.in_scl) {
            ids.push_back(p.comuna_id);
        }
    }
    return ids;
}

// ---------------------------------------------------------------------------
// AntennaRegistry

AntennaRegistry::AntennaRegistry(std::vector<Antenna> antennas, const ComunaTable* comunas)
    : antennas_(std::move(antennas))
{
    std::sort(antennas_.begin(), antennas_.end(),
              [](const Antenna& a, const Antenna& b) { return a.antenna_id < b.antenna_id; });
    AntennaId max_id = 0;
    for (std::size_t i = 0; i < antennas_.size(); ++i) {
        const Antenna& a = antennas_[i];
        if (i > 0 && a.antenna_id == antennas_[i - 1].antenna_id) {
            throw Error(Errc::SchemaError, "duplicate antenna_id " + std::to_string(a.antenna_id));
        }
        if (!valid_lat(a.latitude) || !valid_lon(a.longitude)) {
            throw Error(Errc::ValidationError, "antenna " + std::to_string(a.antenna_id) + ": coordinates out of range");
        }
        if (comunas != nullptr && !comunas->contains(a.comuna_id)) {
            throw Error(Errc::ValidationError, "antenna " + std::to_string(a.antenna_id) + " references unknown comuna " +
                                                   std::to_string(a.comuna_id));
        }
        max_id = std::max(max_id, a.antenna_id);
    }
    if (antennas_.empty()) {
        return;
    }
    if (max_id < kMaxDenseAntenna) {
        dense_.assign(static_cast<std::size_t>(max_id) + 1, -1);
        for (std::size_t i = 0; i < antennas_.size(); ++i) {
            dense_[antennas_[i].antenna_id] = static_cast<std::int32_t>(i);
        }
    } else {
        sparse_.reserve(antennas_.size());
        for (std::size_t i = 0; i < antennas_.size(); ++i) {
            sparse_.emplace(antennas_[i].antenna_id, i);
        }
    }
}

// ---------------------------------------------------------------------------
// QuarantineSchedule

void QuarantineSchedule::add(ComunaId comuna, Date start, Date end)
{
    if (end < start) {
        throw Error(Errc::ValidationError, "quarantine for comuna " + std::to_string(comuna) + " ends before it starts (" +
                                               format_iso_date(start) + " > " + format_iso_date(end) + ")");
    }
    auto& list = by_comuna_[comuna];
    list.push_back({start, end});
    std::sort(list.begin(), list.end(),
              [](const QuarantineInterval& a, const QuarantineInterval& b) { return a.start < b.start; });
    std::vector<QuarantineInterval> merged;
    merged.reserve(list.size());
    for (const auto& iv : list) {
        if (!merged.empty() && iv.start <= merged.back().end) {
            merged.back().end = std::max(merged.back().end, iv.end);
            ++merged_overlaps_;
        } else {
            merged.push_back(iv);
        }
    }
    list = std::move(merged);
}

bool QuarantineSchedule::in_quarantine(ComunaId comuna, Date day) const
{
    auto it = by_comuna_.find(comuna);
    if (it == by_comuna_.end()) {
        return false;
    }
    const auto& list = it->second;
    auto pos = std::upper_bound(list.begin(), list.end(), day,
                                [](Date d, const QuarantineInterval& iv) { return d < iv.start; });
    if (pos == list.begin()) {
        return false;
    }
    --pos;
    return day <= pos->end;
}

std::span<const QuarantineInterval> QuarantineSchedule::intervals(ComunaId comuna) const
{
    auto it = by_comuna_.find(comuna);
    if (it == by_comuna_.end()) {
        return {};
    }
    return it->second;
}

std::vector<ComunaId> QuarantineSchedule::comunas() const
{
    std::vector<ComunaId> ids;
    ids.reserve(by_comuna_.size());
    for (const auto& [id, list] : by_comuna_) {
        ids.push_back(id);
    }
    return ids;
}

std::size_t QuarantineSchedule::size() const noexcept
{
    std::size_t n = 0;
    for (const auto& [id, list] : by_comuna_) {
        n += list.size();
    }
    return n;
}

// ---------------------------------------------------------------------------
// IngestStats

IngestStats& IngestStats::operator+=(const IngestStats& other) noexcept
{
    events_read += other.events_read;
    events_kept += other.events_kept;
    events_dropped_malformed += other.events_dropped_malformed;
    events_dropped_unknown_antenna += other.events_dropped_unknown_antenna;
    events_dropped_out_of_window += other.events_dropped_out_of_window;
    return *this;
}

void check_drop_rate(const IngestStats& stats, double max_fraction)
{
    if (stats.drop_fraction() > max_fraction) {
        throw Error(Errc::ValidationError, std::to_string(stats.dropped()) + " of " + std::to_string(stats.events_read) +
                                               " rows dropped, above the configured limit of " +
                                               std::to_string(max_fraction * 100.0) + "%");
    }
}

std::string_view to_string(XdrFormat format) noexcept
{
    return format == XdrFormat::Csv ? "csv" : "bin";
}

XdrFormat parse_format(std::string_view text)
{
    if (text == "csv") {
        return XdrFormat::Csv;
    }
    if (text == "bin" || text == "binary") {
        return XdrFormat::Binary;
    }
    throw Error(Errc::ValidationError, "unknown XDR format '" + std::string(text) + "' (expected csv or bin)");
}

// ---------------------------------------------------------------------------
// XdrReader

XdrReader::XdrReader(std::istream& in, const StudyWindow& window, const AntennaRegistry& registry)
    : in_(in),
      window_(window),
      registry_(registry),
      buf_(kReadChunk * 2),
      window_start_(window.start_epoch()),
      window_end_(window.end_epoch()),
      binary_epoch_(window.binary_epoch())
{
    if (!in_.good()) {
        throw Error(Errc::IoError, "XDR source is not readable");
    }
    refill();
    if (in_.bad()) {
        throw Error(Errc::IoError, "XDR source read failed");
    }
    const std::size_t available = end_ - pos_;
    if (available >= kXdrBinaryMagic.size() &&
        std::string_view(buf_.data() + pos_, kXdrBinaryMagic.size()) == kXdrBinaryMagic) {
        format_ = XdrFormat::Binary;
        pos_ += kXdrBinaryMagic.size();
        return;
    }
    format_ = XdrFormat::Csv;
    // header line
    while (true) {
        const char* begin = buf_.data() + pos_;
        const char* nl = static_cast<const char*>(std::memchr(begin, '\n', end_ - pos_));
        if (nl != nullptr || eof_) {
            const std::size_t len = nl ? static_cast<std::size_t>(nl - begin) : end_ - pos_;
            const std::string_view header(begin, len);
            if (header != kXdrCsvHeader) {
                if (len == 0 && eof_ && nl == nullptr) {
                    throw Error(Errc::SchemaError, "empty XDR source, expected header '" + std::string(kXdrCsvHeader) + "'");
                }
                throw Error(Errc::SchemaError, "XDR header mismatch: expected '" + std::string(kXdrCsvHeader) + "', got '" +
                                                   std::string(header.substr(0, 80)) + "'");
            }
            pos_ += len + (nl ? 1 : 0);
            return;
        }
        if (!refill()) {
            eof_ = true;
        }
    }
}

bool XdrReader::refill()
{
    if (eof_) {
        return false;
    }
    if (pos_ > 0) {
        std::memmove(buf_.data(), buf_.data() + pos_, end_ - pos_);
        end_ -= pos_;
        pos_ = 0;
    }
    if (buf_.size() - end_ < kReadChunk) {
        buf_.resize(buf_.size() * 2);
    }
    in_.read(buf_.data() + end_, static_cast<std::streamsize>(buf_.size() - end_));
    const auto got = static_cast<std::size_t>(in_.gcount());
    end_ += got;
    if (in_.bad()) {
        throw Error(Errc::IoError, "XDR source read failed");
    }
    if (got == 0 || in_.eof()) {
        eof_ = true;
    }
    return got > 0;
}

bool XdrReader::accept(const XdrEvent& event)
{
    if (event.timestamp < window_start_ || event.timestamp >= window_end_) {
        ++stats_.events_dropped_out_of_window;
        return false;
    }
    if (!registry_.contains(event.antenna_id)) {
        ++stats_.events_dropped_unknown_antenna;
        return false;
    }
    ++stats_.events_kept;
    return true;
}

bool XdrReader::next(XdrEvent& event)
{
    return format_ == XdrFormat::Binary ? next_binary(event) : next_csv(event);
}

bool XdrReader::next_csv(XdrEvent& event)
{
    while (true) {
        const char* begin = buf_.data() + pos_;
        const char* nl = static_cast<const char*>(std::memchr(begin, '\n', end_ - pos_));
        if (nl == nullptr) {
            if (!eof_) {
                refill();
                continue;
            }
            if (pos_ == end_) {
                return false;
            }
            nl = buf_.data() + end_;  // final row without trailing LF
        }
        const char* line_end = nl;
        pos_ = static_cast<std::size_t>(nl - buf_.data()) + (nl == buf_.data() + end_ ? 0 : 1);
        ++stats_.events_read;

        const char* p = begin;
        std::uint64_t device = 0;
        std::uint64_t ts = 0;
        std::uint32_t antenna = 0;
        auto r1 = std::from_chars(p, line_end, device);
        if (r1.ec != std::errc{} || r1.ptr == line_end || *r1.ptr != ',') {
            ++stats_.events_dropped_malformed;
            continue;
        }
        auto r2 = std::from_chars(r1.ptr + 1, line_end, ts);
        if (r2.ec != std::errc{} || r2.ptr == line_end || *r2.ptr != ',' ||
            ts > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
            ++stats_.events_dropped_malformed;
            continue;
        }
        auto r3 = std::from_chars(r2.ptr + 1, line_end, antenna);
        if (r3.ec != std::errc{} || r3.ptr != line_end) {
            ++stats_.events_dropped_malformed;
            continue;
        }
        event.device_id = device;
        event.timestamp = static_cast<std::int64_t>(ts);
        event.antenna_id = antenna;
        if (accept(event)) {
            return true;
        }
    }
}

bool XdrReader::next_binary(XdrEvent& event)
{
    while (true) {
        if (end_ - pos_ < kXdrBinaryRecordSize) {
            if (!eof_) {
                refill();
                continue;
            }
            if (pos_ != end_) {
                ++stats_.events_read;
                ++stats_.events_dropped_malformed;
                pos_ = end_;
            }
            return false;
        }
        const char* rec = buf_.data() + pos_;
        pos_ += kXdrBinaryRecordSize;
        ++stats_.events_read;
        event.device_id = load_u64le(rec);
        event.timestamp = binary_epoch_ + static_cast<std::int64_t>(load_u32le(rec + 8));
        event.antenna_id = load_u32le(rec + 12);
        if (accept(event)) {
            return true;
        }
    }
}

IngestStats parse_xdr(std::istream& in, const StudyWindow& window, const AntennaRegistry& registry,
                      const std::function<void(const XdrEvent&)>& sink)
{
    XdrReader reader(in, window, registry);
    XdrEvent e;
    while (reader.next(e)) {
        sink(e);
    }
    return reader.stats();
}

// ---------------------------------------------------------------------------
// XdrWriter

XdrWriter::XdrWriter(std::ostream& out, XdrFormat format, const StudyWindow& window)
    : out_(out), format_(format), binary_epoch_(window.binary_epoch()), buf_(kReadChunk)
{
    if (format_ == XdrFormat::Binary) {
        out_.write(kXdrBinaryMagic.data(), static_cast<std::streamsize>(kXdrBinaryMagic.size()));
    } else {
        out_ << kXdrCsvHeader << '\n';
    }
}

XdrWriter::~XdrWriter()
{
    try {
        flush();
    } catch (...) {
    }
}

void XdrWriter::write(const XdrEvent& event)
{
    if (buf_.size() - used_ < 64) {
        flush();
    }
    char* p = buf_.data() + used_;
    if (format_ == XdrFormat::Binary) {
        const std::int64_t offset = event.timestamp - binary_epoch_;
        if (offset < 0 || offset > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max())) {
            throw Error(Errc::ValidationError, "timestamp " + std::to_string(event.timestamp) +
                                                   " not representable in the binary encoding of this window");
        }
        store_u64le(p, event.device_id);
        store_u32le(p + 8, static_cast<std::uint32_t>(offset));
        store_u32le(p + 12, event.antenna_id);
        used_ += kXdrBinaryRecordSize;
        return;
    }
    if (event.timestamp < 0) {
        throw Error(Errc::ValidationError, "negative timestamp cannot be written as CSV");
    }
    char* end = buf_.data() + buf_.size();
    p = std::to_chars(p, end, event.device_id).ptr;
    *p++ = ',';
    p = std::to_chars(p, end, event.timestamp).ptr;
    *p++ = ',';
    p = std::to_chars(p, end, event.antenna_id).ptr;
    *p++ = '\n';
    used_ = static_cast<std::size_t>(p - buf_.data());
}

void XdrWriter::flush()
{
    if (used_ > 0) {
        out_.write(buf_.data(), static_cast<std::streamsize>(used_));
        used_ = 0;
    }
    out_.flush();
    if (!out_) {
        throw Error(Errc::IoError, "XDR write failed");
    }
}

// ---------------------------------------------------------------------------
// Reference tables

ComunaTable load_comunas(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kComunaCsvHeader);
    std::vector<ComunaProfile> profiles;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 12) {
            reader.fail(Errc::SchemaError, "expected 12 fields, got " + std::to_string(f.size()));
        }
        auto num = [&](std::size_t i, const char* name) {
            auto v = csv::parse_number<double>(f[i]);
            if (!v) {
                reader.fail(Errc::ValidationError, std::string("bad ") + name + " '" + f[i] + "'");
            }
            return *v;
        };
        auto id = [&](std::size_t i, const char* name) {
            auto v = csv::parse_number<std::uint32_t>(f[i]);
            if (!v) {
                reader.fail(Errc::ValidationError, std::string("bad ") + name + " '" + f[i] + "'");
            }
            return *v;
        };
        ComunaProfile p;
        p.comuna_id = id(0, "comuna_id");
        p.name = f[1];
        p.region_id = id(2, "region_id");
        if (f[3] == "1" || f[3] == "true") {
            p.in_scl = true;
        } else if (f[3] == "0" || f[3] == "false") {
            p.in_scl = false;
        } else {
            reader.fail(Errc::ValidationError, "bad in_scl '" + f[3] + "'");
        }
        p.income_decile = num(4, "income_decile");
        p.poverty_pct = num(5, "poverty_pct");
        p.rurality_pct = num(6, "rurality_pct");
        p.population = num(7, "population");
        p.area_km2 = num(8, "area_km2");
        if (!f[9].empty()) {
            p.icvu = num(9, "icvu");
        }
        p.centroid_lat = num(10, "centroid_lat");
        p.centroid_lon = num(11, "centroid_lon");
        profiles.push_back(std::move(p));
    }
    try {
        return ComunaTable(std::move(profiles));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_comunas(const std::filesystem::path& path, const ComunaTable& table, std::string_view preamble)
{
    auto out = csv::open_output(path);
    write_preamble(out, preamble);
    out << kComunaCsvHeader << '\n';
    for (const auto& p : table.all()) {
        out << p.comuna_id << ',' << csv::quote_if_needed(p.name) << ',' << p.region_id << ',' << (p.in_scl ? 1 : 0)
            << ',' << csv::format_double(p.income_decile) << ',' << csv::format_double(p.poverty_pct) << ','
            << csv::format_double(p.rurality_pct) << ',' << csv::format_double(p.population) << ','
            << csv::format_double(p.area_km2) << ',' << (p.icvu ? csv::format_double(*p.icvu) : std::string()) << ','
            << csv::format_double(p.centroid_lat) << ',' << csv::format_double(p.centroid_lon) << '\n';
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

AntennaRegistry load_antennas(const std::filesystem::path& path, const ComunaTable* comunas)
{
    csv::TableReader reader(path);
    reader.expect_header(kAntennaCsvHeader);
    std::vector<Antenna> antennas;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 4) {
            reader.fail(Errc::SchemaError, "expected 4 fields, got " + std::to_string(f.size()));
        }
        auto aid = csv::parse_number<std::uint32_t>(f[0]);
        auto lat = csv::parse_number<double>(f[1]);
        auto lon = csv::parse_number<double>(f[2]);
        auto cid = csv::parse_number<std::uint32_t>(f[3]);
        if (!aid || !lat || !lon || !cid) {
            reader.fail(Errc::ValidationError, "malformed antenna row");
        }
        antennas.push_back({*aid, *lat, *lon, *cid});
    }
    try {
        return AntennaRegistry(std::move(antennas), comunas);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_antennas(const std::filesystem::path& path, const AntennaRegistry& registry, std::string_view preamble)
{
    auto out = csv::open_output(path);
    write_preamble(out, preamble);
    out << kAntennaCsvHeader << '\n';
    for (const auto& a : registry.all()) {
        out << a.antenna_id << ',' << csv::format_double(a.latitude) << ',' << csv::format_double(a.longitude) << ','
            << a.comuna_id << '\n';
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

QuarantineSchedule load_quarantines(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kQuarantineCsvHeader);
    QuarantineSchedule schedule;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 3) {
            reader.fail(Errc::SchemaError, "expected 3 fields, got " + std::to_string(f.size()));
        }
        auto cid = csv::parse_number<std::uint32_t>(f[0]);
        if (!cid) {
            reader.fail(Errc::ValidationError, "bad comuna_id '" + f[0] + "'");
        }
        try {
            schedule.add(*cid, parse_iso_date(f[1]), parse_iso_date(f[2]));
        } catch (const Error& e) {
            reader.fail(e.code(), e.what());
        }
    }
    return schedule;
}

void write_quarantines(const std::filesystem::path& path, const QuarantineSchedule& schedule,
                       std::string_view preamble)
{
    auto out = csv::open_output(path);
    write_preamble(out, preamble);
    out << kQuarantineCsvHeader << '\n';
    for (ComunaId id : schedule.comunas()) {
        for (const auto& iv : schedule.intervals(id)) {
            out << id << ',' << format_iso_date(iv.start) << ',' << format_iso_date(iv.end) << '\n';
        }
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

}  // namespace xdrmob
