#include "xdrmob/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xdrmob/csv.hpp"

namespace xdrmob::synth {

namespace chr = std::chrono;

// ---------------------------------------------------------------------------
// Random numbers

std::uint64_t SplitMix64::next() noexcept
{
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) noexcept
{
    SplitMix64 sm(seed);
    for (auto& s : s_) {
        s = sm.next();
    }
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t agent, std::uint64_t purpose) noexcept
{
    SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (agent + 1)) ^ (0xD1B54A32D192ED03ULL * (purpose + 1)));
    return Rng(sm.next());
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t Rng::next() noexcept
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept
{
    // High half of the 128-bit product (multiply-shift range reduction).
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
}

std::uint32_t Rng::poisson(double mean) noexcept
{
    if (mean <= 0.0) {
        return 0;
    }
    const double limit = std::exp(-mean);
    double p = 1.0;
    std::uint32_t k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > limit);
    return k - 1;
}

double Rng::normal() noexcept
{
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::weighted(const std::vector<double>& cumulative) noexcept
{
    const double x = uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    if (it == cumulative.end()) {
        --it;
    }
    return static_cast<std::size_t>(it - cumulative.begin());
}

// ---------------------------------------------------------------------------
// Configuration

void ScenarioConfig::validate() const
{
    auto fraction = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(Errc::ValidationError, std::string(name) + " must lie in [0, 1]");
        }
    };
    fraction(migration_rate, "migration_rate");
    fraction(quarantine_drop, "quarantine_drop");
    fraction(noise, "noise");
    fraction(scl_agent_share, "scl_agent_share");
    fraction(local_move_rate, "local_move_rate");
    fraction(quarantine_share, "quarantine_share");
    fraction(internal_share, "internal_share");
    if (!(income_migration_coupling >= -1.0 && income_migration_coupling <= 1.0)) {
        throw Error(Errc::ValidationError, "income_migration_coupling must lie in [-1, 1]");
    }
    if (n_agents < 1) {
        throw Error(Errc::ValidationError, "n_agents must be at least 1");
    }
    if (n_comunas < 4) {
        throw Error(Errc::ValidationError, "n_comunas must be at least 4");
    }
    if (antennas_per_comuna < 1) {
        throw Error(Errc::ValidationError, "antennas_per_comuna must be at least 1");
    }
    if (!(events_per_night >= 0.0 && events_per_night <= 1000.0)) {
        throw Error(Errc::ValidationError, "events_per_night must lie in [0, 1000]");
    }
    if (!(trips_per_day >= 0.0 && trips_per_day <= 50.0)) {
        throw Error(Errc::ValidationError, "trips_per_day must lie in [0, 50]");
    }
    if (tz_offset_hours < -12 || tz_offset_hours > 14) {
        throw Error(Errc::ValidationError, "tz_offset_hours out of range");
    }
    if (year < 1971 || year > 2100) {
        throw Error(Errc::ValidationError, "year out of range");
    }
}

namespace {

using nlohmann::json;

json config_json(const ScenarioConfig& c)
{
    return json{{"seed", c.seed},
                {"n_comunas", c.n_comunas},
                {"n_agents", c.n_agents},
                {"migration_rate", c.migration_rate},
                {"income_migration_coupling", c.income_migration_coupling},
                {"quarantine_drop", c.quarantine_drop},
                {"noise", c.noise},
                {"events_per_night", c.events_per_night},
                {"trips_per_day", c.trips_per_day},
                {"scl_agent_share", c.scl_agent_share},
                {"local_move_rate", c.local_move_rate},
                {"antennas_per_comuna", c.antennas_per_comuna},
                {"year", c.year},
                {"tz_offset_hours", c.tz_offset_hours},
                {"quarantine_share", c.quarantine_share},
                {"internal_share", c.internal_share}};
}

}  // namespace

ScenarioConfig parse_config(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, std::string("scenario config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error(Errc::SchemaError, "scenario config must be a JSON object");
    }
    ScenarioConfig c;
    const json known = config_json(c);
    for (const auto& [key, value] : doc.items()) {
        if (key == "run_digest") {
            continue;  // provenance stamp written by the CLI
        }
        if (!known.contains(key)) {
            throw Error(Errc::SchemaError, "unknown scenario key '" + key + "'");
        }
        if (!value.is_number()) {
            throw Error(Errc::SchemaError, "scenario key '" + key + "' must be a number");
        }
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key)) {
                field = doc.at(key).get<std::remove_reference_t<decltype(field)>>();
            }
        };
        get("seed", c.seed);
        get("n_comunas", c.n_comunas);
        get("n_agents", c.n_agents);
        get("migration_rate", c.migration_rate);
        get("income_migration_coupling", c.income_migration_coupling);
        get("quarantine_drop", c.quarantine_drop);
        get("noise", c.noise);
        get("events_per_night", c.events_per_night);
        get("trips_per_day", c.trips_per_day);
        get("scl_agent_share", c.scl_agent_share);
        get("local_move_rate", c.local_move_rate);
        get("antennas_per_comuna", c.antennas_per_comuna);
        get("year", c.year);
        get("tz_offset_hours", c.tz_offset_hours);
        get("quarantine_share", c.quarantine_share);
        get("internal_share", c.internal_share);
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, std::string("bad scenario value: ") + e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::IoError, "cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json_text(const ScenarioConfig& config)
{
    return config_json(config).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// World

namespace {

struct RegionSite {
    RegionId id;
    double lat;
    double lon;
};

// Regions outside the capital's region, north to south.
constexpr RegionSite kRegions[] = {
    {15, -18.5, -70.0}, {1, -20.2, -69.8}, {2, -23.6, -70.2}, {3, -27.4, -70.3}, {4, -29.9, -71.0},
    {5, -33.0, -71.4},  {6, -34.2, -70.9}, {7, -35.4, -71.5}, {16, -36.6, -72.0}, {8, -37.0, -72.9},
    {9, -38.7, -72.5},  {14, -39.8, -72.9}, {10, -41.5, -73.0}, {11, -45.6, -72.1}, {12, -53.2, -71.2},
};
constexpr double kSclLat = -33.45;
constexpr double kSclLon = -70.65;

std::vector<double> cumulative(const std::vector<double>& weights)
{
    std::vector<double> out(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        out[i] = acc;
    }
    return out;
}

std::vector<ComunaProfile> draw_comunas(const ScenarioConfig& config, Rng& rng)
{
    const std::uint32_t n_scl = std::min<std::uint32_t>(32, config.n_comunas / 2);
    const std::uint32_t n_other = config.n_comunas - n_scl;
    const std::uint32_t n_regions = std::min<std::uint32_t>(std::size(kRegions), n_other);
    std::vector<ComunaProfile> out;
    out.reserve(config.n_comunas);

    auto socio = [&](ComunaProfile& p, bool urban) {
        p.income_decile = rng.uniform(1.0, 10.0);
        p.poverty_pct = std::clamp(30.0 - 2.5 * p.income_decile + 3.0 * rng.normal(), 0.0, 100.0);
        p.rurality_pct = urban ? rng.uniform(0.0, 0.05) : rng.uniform(0.05, 0.7);
        if (urban || rng.bernoulli(0.3)) {
            p.icvu = std::clamp(35.0 + 4.0 * p.income_decile + 3.0 * rng.normal(), 0.0, 100.0);
        }
    };

    for (std::uint32_t k = 0; k < n_scl; ++k) {
        ComunaProfile p;
        p.comuna_id = 13101 + k;
        p.name = "SCL-" + std::to_string(k + 1);
        p.region_id = kMetropolitanRegion;
        p.in_scl = true;
        socio(p, true);
        p.population = std::round(std::max(5000.0, std::exp(std::log(150000.0) + 0.6 * rng.normal())));
        p.area_km2 = rng.uniform(8.0, 120.0);
        p.centroid_lat = kSclLat + rng.uniform(-0.12, 0.12);
        p.centroid_lon = kSclLon + rng.uniform(-0.12, 0.12);
        out.push_back(std::move(p));
    }
    std::vector<std::uint32_t> per_region(n_regions, 0);
    for (std::uint32_t k = 0; k < n_other; ++k) {
        const RegionSite& site = kRegions[k % n_regions];
        ComunaProfile p;
        p.region_id = site.id;
        p.comuna_id = site.id * 1000 + 101 + per_region[k % n_regions]++;
        p.name = "R" + std::to_string(site.id) + "-" + std::to_string(per_region[k % n_regions]);
        socio(p, false);
        p.population = std::round(std::max(2000.0, std::exp(std::log(60000.0) + 0.8 * rng.normal())));
        p.area_km2 = rng.uniform(50.0, 3000.0);
        p.centroid_lat = site.lat + rng.uniform(-0.6, 0.6);
        p.centroid_lon = site.lon + rng.uniform(-0.3, 0.3);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

double World::planned_intensity(ComunaId comuna, Date day) const
{
    const double factor = quarantines.in_quarantine(comuna, day) ? 1.0 - config.quarantine_drop : 1.0;
    return 2.0 * config.trips_per_day * factor;
}

World generate_world(const ScenarioConfig& config)
{
    config.validate();
    World world;
    world.config = config;
    world.window = config.window();
    Rng rng(config.seed);

    world.comunas = ComunaTable(draw_comunas(config, rng));
    const auto profiles = world.comunas.all();
    const std::size_t n = profiles.size();

    std::vector<Antenna> antennas;
    AntennaId next_antenna = 1;
    for (const auto& p : profiles) {
        auto& ids = world.antennas_by_comuna[p.comuna_id];
        for (std::uint32_t j = 0; j < config.antennas_per_comuna; ++j) {
            antennas.push_back(
                {next_antenna, p.centroid_lat + rng.uniform(-0.01, 0.01), p.centroid_lon + rng.uniform(-0.01, 0.01),
                 p.comuna_id});
            ids.push_back(next_antenna++);
        }
    }
    world.antennas = AntennaRegistry(std::move(antennas), &world.comunas);

    // Quarantines: a random subset of capital comunas, one interval each between April and August.
    std::vector<ComunaId> scl = world.comunas.scl_ids();
    const auto n_quarantined =
        static_cast<std::size_t>(std::llround(config.quarantine_share * static_cast<double>(scl.size())));
    for (std::size_t i = 0; i < n_quarantined; ++i) {
        std::swap(scl[i], scl[i + rng.below(scl.size() - i)]);
        const Date start =
            Date{chr::year{config.year} / chr::April / 1} + chr::days{static_cast<int>(rng.below(61))};
        const Date end = start + chr::days{27 + static_cast<int>(rng.below(43))};
        world.quarantines.add(scl[i], start, end);
    }

    // Agent homes.
    std::vector<std::size_t> scl_idx;
    std::vector<std::size_t> other_idx;
    std::vector<double> scl_w;
    std::vector<double> other_w;
    for (std::size_t i = 0; i < n; ++i) {
        (profiles[i].in_scl ? scl_idx : other_idx).push_back(i);
        (profiles[i].in_scl ? scl_w : other_w).push_back(profiles[i].population);
    }
    const auto scl_cum = cumulative(scl_w);
    const auto other_cum = cumulative(other_w);
    auto pick_antenna = [&](Rng& r, ComunaId comuna) {
        const auto& ids = world.antennas_by_comuna.at(comuna);
        return ids[r.below(ids.size())];
    };

    world.agents.resize(config.n_agents);
    for (std::uint64_t k = 0; k < config.n_agents; ++k) {
        AgentTruth& a = world.agents[k];
        a.agent_id = k + 1;
        Rng r = Rng::stream(config.seed, a.agent_id, 0);
        const bool in_scl = r.bernoulli(config.scl_agent_share);
        const std::size_t idx = in_scl ? scl_idx[r.weighted(scl_cum)] : other_idx[r.weighted(other_cum)];
        a.origin = profiles[idx].comuna_id;
        a.origin_antenna = pick_antenna(r, a.origin);
        a.destination = a.origin;
        a.destination_antenna = a.origin_antenna;
    }

    // Emigration propensity scaled by the origin decile, centred over agents.
    double mean_decile = 0.0;
    for (const auto& a : world.agents) {
        mean_decile += world.comunas.at(a.origin).income_decile;
    }
    mean_decile /= static_cast<double>(world.agents.size());
    double max_dev = 0.0;
    for (const auto& a : world.agents) {
        max_dev = std::max(max_dev, std::abs(world.comunas.at(a.origin).income_decile - mean_decile));
    }

    // Gravity kernel towards other regions, uniform choice inside the region.
    std::vector<std::vector<double>> gravity_cum(n);
    std::vector<std::vector<std::size_t>> same_region(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (profiles[j].region_id == profiles[i].region_id) {
                if (j != i) {
                    same_region[i].push_back(j);
                }
                continue;
            }
            const double d = haversine_km(profiles[i].centroid_lat, profiles[i].centroid_lon,
                                          profiles[j].centroid_lat, profiles[j].centroid_lon);
            w[j] = profiles[j].population / std::max(d, 10.0);
        }
        gravity_cum[i] = cumulative(w);
    }
    auto index_of = [&](ComunaId id) {
        return static_cast<std::size_t>(
            std::lower_bound(profiles.begin(), profiles.end(), id,
                             [](const ComunaProfile& p, ComunaId v) { return p.comuna_id < v; }) -
            profiles.begin());
    };

    std::vector<Date> move_weeks;
    for (Date w : world.window.weeks()) {
        if (w > world.window.baseline_week() && w < world.window.november_weeks()[0]) {
            move_weeks.push_back(w);
        }
    }

    for (auto& a : world.agents) {
        Rng r = Rng::stream(config.seed, a.agent_id, 1);
        const std::size_t oi = index_of(a.origin);
        const double s = max_dev > 0.0 ? (profiles[oi].income_decile - mean_decile) / max_dev : 0.0;
        const double p = std::clamp(config.migration_rate * (1.0 + config.income_migration_coupling * s), 0.0, 1.0);
        std::optional<std::size_t> dest;
        if (r.bernoulli(p) && gravity_cum[oi].back() > 0.0) {
            dest = r.weighted(gravity_cum[oi]);
        } else if (r.bernoulli(config.local_move_rate) && !same_region[oi].empty()) {
            dest = same_region[oi][r.below(same_region[oi].size())];
        }
        if (dest) {
            a.destination = profiles[*dest].comuna_id;
            a.destination_antenna = pick_antenna(r, a.destination);
            a.move_week = move_weeks[r.below(move_weeks.size())];
            a.migrated = profiles[*dest].region_id != profiles[oi].region_id;
        }
    }
    return world;
}

// ---------------------------------------------------------------------------
// Events

std::vector<XdrEvent> agent_events(const World& world, const AgentTruth& agent)
{
    const ScenarioConfig& c = world.config;
    const StudyWindow& window = world.window;
    Rng r = Rng::stream(c.seed, agent.agent_id, 2);
    const std::int64_t end_epoch = window.end_epoch();
    const auto all_antennas = world.antennas.all();
    const double whole_nights = std::floor(c.events_per_night);
    const double frac_night = c.events_per_night - whole_nights;

    const std::vector<ComunaId> scl = world.comunas.scl_ids();
    std::vector<ComunaId> everyone;
    for (const auto& p : world.comunas.all()) {
        everyone.push_back(p.comuna_id);
    }

    std::vector<XdrEvent> events;
    std::vector<AntennaId> home_of_event;
    std::vector<std::int64_t> secs;
    auto push = [&](std::int64_t ts, AntennaId antenna, AntennaId home) {
        events.push_back({agent.agent_id, ts, antenna});
        home_of_event.push_back(home);
    };

    for (Date day : window.days()) {
        const ComunaId home = agent.home_on(day);
        const AntennaId home_antenna = agent.antenna_on(day);

        // Night starting this evening, all at home.
        const auto n_night = static_cast<std::uint32_t>(whole_nights) + (r.bernoulli(frac_night) ? 1u : 0u);
        for (std::uint32_t k = 0; k < n_night; ++k) {
            const std::int64_t ts = window.to_utc(day, 22 * 3600 + static_cast<int>(r.below(9 * 3600)));
            if (ts < end_epoch) {
                push(ts, home_antenna, home_antenna);
            }
        }

        // Morning ping at home, then out-and-back excursions.
        push(window.to_utc(day, 8 * 3600 + static_cast<int>(r.below(1800))), home_antenna, home_antenna);
        const double factor = world.quarantines.in_quarantine(home, day) ? 1.0 - c.quarantine_drop : 1.0;
        const std::uint32_t k_trips = std::min<std::uint32_t>(r.poisson(c.trips_per_day * factor), 200);
        secs.resize(2 * k_trips);
        for (auto& s : secs) {
            s = 30600 + static_cast<std::int64_t>(r.below(72000 - 30600 - 2 * k_trips));
        }
        std::sort(secs.begin(), secs.end());
        for (std::size_t i = 1; i < secs.size(); ++i) {
            secs[i] = std::max(secs[i], secs[i - 1] + 1);
        }
        const auto& local = world.antennas_by_comuna.at(home);
        const ComunaProfile& home_profile = world.comunas.at(home);
        for (std::uint32_t k = 0; k < k_trips; ++k) {
            AntennaId away = 0;
            if (local.size() >= 2 && r.bernoulli(c.internal_share)) {
                do {
                    away = local[r.below(local.size())];
                } while (away == home_antenna);
            } else {
                // Another comuna: capital residents stay within the capital when possible.
                const auto& pool = home_profile.in_scl && scl.size() >= 2 ? scl : everyone;
                ComunaId other = home;
                while (other == home) {
                    other = pool[r.below(pool.size())];
                }
                const auto& ids = world.antennas_by_comuna.at(other);
                away = ids[r.below(ids.size())];
            }
            push(window.to_utc(day, static_cast<int>(secs[2 * k])), away, home_antenna);
            push(window.to_utc(day, static_cast<int>(secs[2 * k + 1])), home_antenna, home_antenna);
        }
    }

    // Noise last: two draws per event whatever the noise level, so noisier
    // runs corrupt a superset of the events of quieter ones.
    if (all_antennas.size() >= 2) {
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double u = r.uniform();
            std::uint64_t pick = r.below(all_antennas.size() - 1);
            if (u < c.noise) {
                if (all_antennas[pick].antenna_id == home_of_event[i]) {
                    pick = all_antennas.size() - 1;
                }
                events[i].antenna_id = all_antennas[pick].antenna_id;
            }
        }
    }

    std::sort(events.begin(), events.end(), [](const XdrEvent& a, const XdrEvent& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.antenna_id < b.antenna_id;
    });
    return events;
}

std::uint64_t emit_events(const World& world, std::ostream& out, XdrFormat format, unsigned threads)
{
    threads = std::max(1u, threads);
    XdrWriter writer(out, format, world.window);
    std::uint64_t count = 0;
    const std::size_t n = world.agents.size();
    const std::size_t batch = 64 * threads;
    std::vector<std::vector<XdrEvent>> buffers(batch);
    for (std::size_t begin = 0; begin < n; begin += batch) {
        const std::size_t end = std::min(n, begin + batch);
        auto work = [&](unsigned t) {
            for (std::size_t k = begin + t; k < end; k += threads) {
                buffers[k - begin] = agent_events(world, world.agents[k]);
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < threads; ++t) {
                pool.emplace_back(work, t);
            }
        }
        for (std::size_t k = begin; k < end; ++k) {
            for (const auto& e : buffers[k - begin]) {
                writer.write(e);
            }
            count += buffers[k - begin].size();
        }
    }
    writer.flush();
    if (!out) {
        throw Error(Errc::IoError, "failed writing XDR stream");
    }
    return count;
}

// ---------------------------------------------------------------------------
// Ground truth files

namespace {

std::ofstream open_with_header(const std::filesystem::path& path, std::string_view preamble, std::string_view header)
{
    auto out = csv::open_output(path);
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
    out << header << '\n';
    return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

}  // namespace

void write_ground_truth(const std::filesystem::path& path, const World& world, std::string_view preamble)
{
    auto out = open_with_header(path, preamble, kGroundTruthCsvHeader);
    for (const auto& a : world.agents) {
        out << a.agent_id << ',' << a.origin << ',' << a.destination << ',' << (a.migrated ? 1 : 0) << '\n';
    }
    check_written(out, path);
}

std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kGroundTruthCsvHeader);
    std::vector<GroundTruthRow> rows;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 4) {
            reader.fail(Errc::SchemaError, "expected 4 fields");
        }
        auto id = csv::parse_number<DeviceId>(f[0]);
        auto o = csv::parse_number<ComunaId>(f[1]);
        auto d = csv::parse_number<ComunaId>(f[2]);
        if (!id || !o || !d || (f[3] != "0" && f[3] != "1")) {
            reader.fail(Errc::ValidationError, "malformed ground truth row");
        }
        rows.push_back({*id, *o, *d, f[3] == "1"});
    }
    return rows;
}

void write_ground_truth_weekly(const std::filesystem::path& path, const World& world, std::string_view preamble)
{
    auto out = open_with_header(path, preamble, kGroundTruthWeeklyCsvHeader);
    std::vector<Date> weeks;
    for (Date w : world.window.weeks()) {
        for (int d = 0; d < 5; ++d) {
            if (world.window.contains(w + chr::days{d})) {
                weeks.push_back(w);
                break;
            }
        }
    }
    for (const auto& a : world.agents) {
        for (Date w : weeks) {
            out << a.agent_id << ',' << format_iso_date(w) << ',' << a.home_on(w) << '\n';
        }
    }
    check_written(out, path);
}

void write_planned_intensity(const std::filesystem::path& path, const World& world, std::string_view preamble)
{
    auto out = open_with_header(path, preamble, kPlannedIntensityCsvHeader);
    const auto days = world.window.days();
    for (const auto& p : world.comunas.all()) {
        for (Date d : days) {
            out << p.comuna_id << ',' << format_iso_date(d) << ','
                << csv::format_double(world.planned_intensity(p.comuna_id, d)) << '\n';
        }
    }
    check_written(out, path);
}

std::string xdr_file_name(XdrFormat format)
{
    return format == XdrFormat::Binary ? "xdr.bin" : "xdr.csv";
}

void write_scenario(const World& world, const std::filesystem::path& dir, XdrFormat format, unsigned threads,
                    std::string_view preamble)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    {
        auto out = csv::open_output(dir / "scenario.json");
        out << to_json_text(world.config);
        check_written(out, dir / "scenario.json");
    }
    write_comunas(dir / "comunas.csv", world.comunas, preamble);
    write_antennas(dir / "antennas.csv", world.antennas, preamble);
    write_quarantines(dir / "quarantines.csv", world.quarantines, preamble);
    {
        const auto path = dir / xdr_file_name(format);
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error(Errc::IoError, "cannot open " + path.string());
        }
        emit_events(world, out, format, threads);
    }
    write_ground_truth(dir / "ground_truth.csv", world, preamble);
    write_ground_truth_weekly(dir / "ground_truth_weekly.csv", world, preamble);
    write_planned_intensity(dir / "planned_intensity.csv", world, preamble);
}

}  // namespace xdrmob::synth
