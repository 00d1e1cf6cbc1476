#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xdrmob/core.hpp"

namespace xdrmob {

inline constexpr std::string_view kXdrCsvHeader = "device_id,timestamp,antenna_id";
inline constexpr std::string_view kXdrBinaryMagic = "XDRBIN01";
inline constexpr std::size_t kXdrBinaryRecordSize = 16;
inline constexpr std::string_view kComunaCsvHeader =
    "comuna_id,name,region_id,in_scl,income_decile,poverty_pct,rurality_pct,population,area_km2,icvu,"
    "centroid_lat,centroid_lon";
inline constexpr std::string_view kAntennaCsvHeader = "antenna_id,lat,lon,comuna_id";
inline constexpr std::string_view kQuarantineCsvHeader = "comuna_id,start_date,end_date";

/// Comuna profiles sorted by id.
class ComunaTable {
public:
    ComunaTable() = default;
    /// Validates every profile. Duplicate ids raise SchemaError, out-of-range
    /// attributes raise ValidationError.
    explicit ComunaTable(std::vector<ComunaProfile> profiles);

    const ComunaProfile* find(ComunaId id) const noexcept;
    /// Throws ValidationError for unknown ids.
    const ComunaProfile& at(ComunaId id) const;
    bool contains(ComunaId id) const noexcept { return find(id) != nullptr; }

    std::span<const ComunaProfile> all() const noexcept { return profiles_; }
    std::size_t size() const noexcept { return profiles_.size(); }
    std::vector<ComunaId> scl_ids() const;

private:
    std::vector<ComunaProfile> profiles_;
};

void validate_profile(const ComunaProfile& profile);

class AntennaRegistry {
public:
    AntennaRegistry() = default;
    /// When `comunas` is given every antenna must reference a known comuna.
    explicit AntennaRegistry(std::vector<Antenna> antennas, const ComunaTable* comunas = nullptr);

    const Antenna* find(AntennaId id) const noexcept
    {
        if (id < dense_.size()) {
            const std::int32_t slot = dense_[id];
            return slot < 0 ? nullptr : &antennas_[static_cast<std::size_t>(slot)];
        }
        if (sparse_.empty()) {
            return nullptr;
        }
        auto it = sparse_.find(id);
        return it == sparse_.end() ? nullptr : &antennas_[it->second];
    }
    bool contains(AntennaId id) const noexcept { return find(id) != nullptr; }
    std::optional<ComunaId> comuna_of(AntennaId id) const noexcept
    {
        const Antenna* a = find(id);
        return a ? std::optional<ComunaId>(a->comuna_id) : std::nullopt;
    }

    std::span<const Antenna> all() const noexcept { return antennas_; }
    std::size_t size() const noexcept { return antennas_.size(); }

private:
    std::vector<Antenna> antennas_;
    std::vector<std::int32_t> dense_;
    std::unordered_map<AntennaId, std::size_t> sparse_;
};

struct QuarantineInterval {
    Date start;
    Date end;  // inclusive
};

/// Per-comuna, merged, sorted inclusive intervals.
class QuarantineSchedule {
public:
    /// Throws ValidationError if end < start. Overlapping intervals of one
    /// comuna are merged and counted in merged_overlaps().
    void add(ComunaId comuna, Date start, Date end);

    bool in_quarantine(ComunaId comuna, Date day) const;
    std::span<const QuarantineInterval> intervals(ComunaId comuna) const;
    std::vector<ComunaId> comunas() const;
    std::size_t merged_overlaps() const noexcept { return merged_overlaps_; }
    std::size_t size() const noexcept;

private:
    std::map<ComunaId, std::vector<QuarantineInterval>> by_comuna_;
    std::size_t merged_overlaps_ = 0;
};

struct IngestStats {
    std::uint64_t events_read = 0;
    std::uint64_t events_kept = 0;
    std::uint64_t events_dropped_malformed = 0;
    std::uint64_t events_dropped_unknown_antenna = 0;
    std::uint64_t events_dropped_out_of_window = 0;

    std::uint64_t dropped() const noexcept
    {
        return events_dropped_malformed + events_dropped_unknown_antenna + events_dropped_out_of_window;
    }
    double drop_fraction() const noexcept
    {
        return events_read == 0 ? 0.0 : static_cast<double>(dropped()) / static_cast<double>(events_read);
    }
    bool conserved() const noexcept { return events_read == events_kept + dropped(); }

    IngestStats& operator+=(const IngestStats& other) noexcept;
    friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

/// Raises ValidationError when more than `max_fraction` of rows were dropped.
void check_drop_rate(const IngestStats& stats, double max_fraction);

enum class XdrFormat { Csv, Binary };

std::string_view to_string(XdrFormat format) noexcept;
XdrFormat parse_format(std::string_view text);

/// Streaming XDR reader. The encoding is detected from the leading bytes.
/// Invalid rows are counted in stats() and skipped; only a bad header or an
/// unreadable stream is fatal.
class XdrReader {
public:
    XdrReader(std::istream& in, const StudyWindow& window, const AntennaRegistry& registry);

    bool next(XdrEvent& event);
    XdrFormat format() const noexcept { return format_; }
    const IngestStats& stats() const noexcept { return stats_; }

private:
    bool refill();
    bool next_csv(XdrEvent& event);
    bool next_binary(XdrEvent& event);
    bool accept(const XdrEvent& event);

    std::istream& in_;
    const StudyWindow& window_;
    const AntennaRegistry& registry_;
    XdrFormat format_ = XdrFormat::Csv;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::size_t end_ = 0;
    bool eof_ = false;
    std::int64_t window_start_ = 0;
    std::int64_t window_end_ = 0;
    std::int64_t binary_epoch_ = 0;
    IngestStats stats_;
};

/// Reads a whole stream, invoking `sink` for every kept event in file order.
IngestStats parse_xdr(std::istream& in, const StudyWindow& window, const AntennaRegistry& registry,
                      const std::function<void(const XdrEvent&)>& sink);

class XdrWriter {
public:
    XdrWriter(std::ostream& out, XdrFormat format, const StudyWindow& window);
    ~XdrWriter();
    XdrWriter(const XdrWriter&) = delete;
    XdrWriter& operator=(const XdrWriter&) = delete;

    /// Binary output requires timestamps representable as a u32 offset from
    /// the window's binary epoch; other events raise ValidationError.
    void write(const XdrEvent& event);
    void flush();

private:
    std::ostream& out_;
    XdrFormat format_;
    std::int64_t binary_epoch_;
    std::vector<char> buf_;
    std::size_t used_ = 0;
};

ComunaTable load_comunas(const std::filesystem::path& path);
void write_comunas(const std::filesystem::path& path, const ComunaTable& table, std::string_view preamble = {});

AntennaRegistry load_antennas(const std::filesystem::path& path, const ComunaTable* comunas = nullptr);
void write_antennas(const std::filesystem::path& path, const AntennaRegistry& registry, std::string_view preamble = {});

QuarantineSchedule load_quarantines(const std::filesystem::path& path);
void write_quarantines(const std::filesystem::path& path, const QuarantineSchedule& schedule,
                       std::string_view preamble = {});

}  // namespace xdrmob
