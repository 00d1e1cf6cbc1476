#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "xdrmob/core.hpp"
#include "xdrmob/ingest.hpp"

namespace xdrmob::synth {

/// SplitMix64, used to expand seeds.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept;

private:
    std::uint64_t state_;
};

/// xoshiro256** seeded by four SplitMix64 outputs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;
    /// Independent stream for (seed, agent, purpose).
    static Rng stream(std::uint64_t seed, std::uint64_t agent, std::uint64_t purpose) noexcept;

    std::uint64_t next() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }
    /// Knuth's multiplication method; mean must be <= 50.
    std::uint32_t poisson(double mean) noexcept;
    /// Box-Muller, one draw per call.
    double normal() noexcept;
    /// Index drawn with probability proportional to `cumulative` increments.
    std::size_t weighted(const std::vector<double>& cumulative) noexcept;

private:
    std::uint64_t s_[4];
};

struct ScenarioConfig {
    std::uint64_t seed = 42;
    std::uint32_t n_comunas = 60;
    std::uint64_t n_agents = 10000;
    double migration_rate = 0.12;
    /// Slope linking the origin's income decile to emigration propensity, in [-1, 1].
    double income_migration_coupling = 0.0;
    double quarantine_drop = 0.3;
    double noise = 0.0;
    double events_per_night = 4.0;

    double trips_per_day = 2.0;
    double scl_agent_share = 0.8;
    double local_move_rate = 0.05;
    std::uint32_t antennas_per_comuna = 4;
    int year = 2020;
    int tz_offset_hours = -4;
    double quarantine_share = 0.5;
    double internal_share = 0.6;

    /// Throws ValidationError on out-of-range fields.
    void validate() const;
    StudyWindow window() const { return StudyWindow(year, tz_offset_hours); }

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Missing keys keep their defaults; unknown keys raise SchemaError.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string to_json_text(const ScenarioConfig& config);

struct AgentTruth {
    DeviceId agent_id = 0;
    ComunaId origin = 0;
    ComunaId destination = 0;
    AntennaId origin_antenna = 0;
    AntennaId destination_antenna = 0;
    std::optional<Date> move_week;  // Monday from which the agent lives at `destination`
    bool migrated = false;

    ComunaId home_on(Date day) const noexcept { return move_week && day >= *move_week ? destination : origin; }
    AntennaId antenna_on(Date day) const noexcept
    {
        return move_week && day >= *move_week ? destination_antenna : origin_antenna;
    }
};

struct World {
    ScenarioConfig config;
    StudyWindow window{2020};
    ComunaTable comunas;
    AntennaRegistry antennas;
    QuarantineSchedule quarantines;
    std::vector<AgentTruth> agents;  // ordered by agent id, ids 1..n
    std::map<ComunaId, std::vector<AntennaId>> antennas_by_comuna;

    /// Expected trips per active device on a day for residents of `comuna`.
    double planned_intensity(ComunaId comuna, Date day) const;
};

World generate_world(const ScenarioConfig& config);

/// Every event of one agent, time-sorted.
std::vector<XdrEvent> agent_events(const World& world, const AgentTruth& agent);

/// Streams all events ordered by agent id then time. Returns the event count.
std::uint64_t emit_events(const World& world, std::ostream& out, XdrFormat format, unsigned threads = 1);

inline constexpr std::string_view kGroundTruthCsvHeader = "agent_id,origin_comuna,destination_comuna,migrated";
inline constexpr std::string_view kGroundTruthWeeklyCsvHeader = "agent_id,week_start,comuna_id";
inline constexpr std::string_view kPlannedIntensityCsvHeader = "comuna,date,intensity";

struct GroundTruthRow {
    DeviceId agent_id = 0;
    ComunaId origin_comuna = 0;
    ComunaId destination_comuna = 0;
    bool migrated = false;

    friend bool operator==(const GroundTruthRow&, const GroundTruthRow&) = default;
};

void write_ground_truth(const std::filesystem::path& path, const World& world, std::string_view preamble = {});
std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path);
/// True home for every week that has at least one weekday night inside the window.
void write_ground_truth_weekly(const std::filesystem::path& path, const World& world, std::string_view preamble = {});
void write_planned_intensity(const std::filesystem::path& path, const World& world, std::string_view preamble = {});

/// File name of the XDR stream inside a scenario directory.
std::string xdr_file_name(XdrFormat format);

/// Writes scenario.json, comunas.csv, antennas.csv, quarantines.csv, the XDR
/// stream and the ground-truth tables into `dir`.
void write_scenario(const World& world, const std::filesystem::path& dir, XdrFormat format, unsigned threads = 1,
                    std::string_view preamble = {});

}  // namespace xdrmob::synth
