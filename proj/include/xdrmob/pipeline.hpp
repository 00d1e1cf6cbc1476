#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "xdrmob/core.hpp"
#include "xdrmob/ingest.hpp"

namespace xdrmob::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kManifestName = "manifest.json";

/// Settings shared by every stage. Only `threads` may differ between runs
/// that must produce identical bytes.
struct RunOptions {
    int window_year = 2020;
    int tz_offset = -4;
    unsigned min_night_events = 3;
    int baseline_week = 2;
    unsigned threads = 1;
    XdrFormat format = XdrFormat::Csv;
    std::optional<std::uint64_t> seed;
    /// A stage fails when more than this fraction of XDR rows is dropped.
    double max_drop_fraction = 0.10;
    bool group = false;  // convert: reorder events by device

    StudyWindow window() const { return StudyWindow(window_year, tz_offset, baseline_week); }
};

/// Reads option values from a JSON object (keys named like the long flags
/// with underscores). Unknown keys raise SchemaError.
RunOptions options_from_json(std::string_view json_text, RunOptions base = {});

/// Returns the exit code for an error: 3 pipeline order, 4 I/O, 2 otherwise.
int exit_code_for(Errc code) noexcept;

struct SynthArgs {
    std::optional<std::filesystem::path> config;
    std::filesystem::path out;
};
void cmd_synth(const SynthArgs& args, const RunOptions& opts);

struct HomesArgs {
    std::filesystem::path xdr;
    std::filesystem::path antennas;
    std::optional<std::filesystem::path> comunas;
    std::filesystem::path out;
};
void cmd_homes(const HomesArgs& args, const RunOptions& opts);

struct MigrateArgs {
    std::filesystem::path homes;  // output directory of `homes`
    std::filesystem::path comunas;
    std::filesystem::path out;
};
void cmd_migrate(const MigrateArgs& args, const RunOptions& opts);

struct IndicesArgs {
    std::filesystem::path xdr;
    std::filesystem::path antennas;
    std::filesystem::path homes;  // output directory of `homes`
    std::filesystem::path quarantines;
    std::filesystem::path out;
};
void cmd_indices(const IndicesArgs& args, const RunOptions& opts);

struct AnalyzeArgs {
    /// Output directories of `migrate`; the earliest study year is the base year.
    std::vector<std::filesystem::path> migrations;
    std::filesystem::path comunas;
    std::optional<std::filesystem::path> census;
    std::optional<std::filesystem::path> indices;  // output directory of `indices`
    std::filesystem::path out;
};
void cmd_analyze(const AnalyzeArgs& args, const RunOptions& opts);

struct ReportArgs {
    std::filesystem::path analysis;  // output directory of `analyze`
    std::filesystem::path out;
};
void cmd_report(const ReportArgs& args, const RunOptions& opts);

struct ConvertArgs {
    std::filesystem::path in;
    std::filesystem::path antennas;
    std::filesystem::path out;
};
/// Re-encodes an XDR stream in opts.format, dropping the rows ingestion would
/// drop; with opts.group the events are reordered by device then time.
IngestStats cmd_convert(const ConvertArgs& args, const RunOptions& opts);

/// One device's contiguous run of events inside a batch.
struct DeviceSlice {
    DeviceId device_id = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Reads a device-grouped XDR stream in batches of whole devices. A device
/// that reappears after another device raises SchemaError.
class DeviceBatcher {
public:
    explicit DeviceBatcher(XdrReader& reader, std::size_t batch_events = 1 << 20);

    /// Replaces `events`/`devices` with the next batch; false at end of input.
    bool next(std::vector<XdrEvent>& events, std::vector<DeviceSlice>& devices);

private:
    XdrReader& reader_;
    std::size_t batch_events_;
    std::optional<XdrEvent> pending_;
    std::unordered_set<DeviceId> seen_;
    bool done_ = false;
};

/// Runs fn(i, worker) for i in [0, n) on `threads` workers; worker w takes
/// the indices congruent to w modulo `threads`.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t, unsigned)>& fn);

}  // namespace xdrmob::cli
