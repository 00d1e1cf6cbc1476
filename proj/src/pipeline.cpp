#include "xdrmob/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xdrmob/csv.hpp"
#include "xdrmob/digest.hpp"
#include "xdrmob/home_inference.hpp"
#include "xdrmob/migration.hpp"
#include "xdrmob/mobility_index.hpp"
#include "xdrmob/stats.hpp"
#include "xdrmob/synth.hpp"

namespace xdrmob::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Options and plumbing

RunOptions options_from_json(std::string_view json_text, RunOptions base)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error(Errc::SchemaError, "config must be a JSON object");
    }
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "window_year") {
                base.window_year = value.get<int>();
            } else if (key == "tz_offset") {
                base.tz_offset = value.get<int>();
            } else if (key == "min_night_events") {
                base.min_night_events = value.get<unsigned>();
            } else if (key == "baseline_week") {
                base.baseline_week = value.get<int>();
            } else if (key == "threads") {
                base.threads = value.get<unsigned>();
            } else if (key == "format") {
                base.format = parse_format(value.get<std::string>());
            } else if (key == "seed") {
                base.seed = value.get<std::uint64_t>();
            } else if (key == "max_drop_fraction") {
                base.max_drop_fraction = value.get<double>();
            } else if (key == "group") {
                base.group = value.get<bool>();
            } else {
                throw Error(Errc::SchemaError, "unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, std::string("bad config value: ") + e.what());
    }
    return base;
}

int exit_code_for(Errc code) noexcept
{
    switch (code) {
    case Errc::PipelineOrderError: return 3;
    case Errc::IoError: return 4;
    default: return 2;
    }
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t, unsigned)>& fn)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i, 0);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < n; i += threads) {
                        fn(i, t);
                    }
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

DeviceBatcher::DeviceBatcher(XdrReader& reader, std::size_t batch_events)
    : reader_(reader), batch_events_(std::max<std::size_t>(1, batch_events))
{
}

bool DeviceBatcher::next(std::vector<XdrEvent>& events, std::vector<DeviceSlice>& devices)
{
    events.clear();
    devices.clear();
    auto start_device = [&](const XdrEvent& e) {
        if (!seen_.insert(e.device_id).second) {
            throw Error(Errc::SchemaError, "XDR input is not grouped by device: device " +
                                               std::to_string(e.device_id) +
                                               " reappears; reorder it with `xdrmob convert --group`");
        }
        devices.push_back({e.device_id, events.size(), events.size()});
        events.push_back(e);
    };
    if (pending_) {
        start_device(*pending_);
        pending_.reset();
    } else if (done_) {
        return false;
    }
    XdrEvent e;
    while (reader_.next(e)) {
        if (!devices.empty() && e.device_id == devices.back().device_id) {
            events.push_back(e);
            continue;
        }
        if (!devices.empty()) {
            devices.back().end = events.size();
            if (events.size() >= batch_events_) {
                pending_ = e;
                return true;
            }
        }
        start_device(e);
    }
    done_ = true;
    if (devices.empty()) {
        return false;
    }
    devices.back().end = events.size();
    return true;
}

namespace {

const json& module_versions()
{
    static const json versions = {{"core", "1"},           {"ingest", "1"},         {"home_inference", "1"},
                                  {"migration", "1"},      {"mobility_index", "1"}, {"stats", "1"},
                                  {"synth", "1"},          {"transport", "1"}};
    return versions;
}

std::string preamble_for(const std::string& digest)
{
    return "# run_digest=" + digest;
}

json window_json(const StudyWindow& w)
{
    return {{"window_year", w.year()}, {"tz_offset", w.tz_offset_hours()}, {"baseline_week", w.baseline_week_ordinal()}};
}

StudyWindow window_from(const json& config)
{
    try {
        return StudyWindow(config.at("window_year").get<int>(), config.at("tz_offset").get<int>(),
                           config.at("baseline_week").get<int>());
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, std::string("manifest lacks window settings: ") + e.what());
    }
}

json ingest_json(const IngestStats& s)
{
    return {{"events_read", s.events_read},
            {"events_kept", s.events_kept},
            {"events_dropped_malformed", s.events_dropped_malformed},
            {"events_dropped_unknown_antenna", s.events_dropped_unknown_antenna},
            {"events_dropped_out_of_window", s.events_dropped_out_of_window}};
}

/// Digest over everything that determines a stage's outputs. Thread count and
/// timings are deliberately left out.
std::string run_digest(std::string_view stage, const json& config, const json& inputs)
{
    const json doc = {{"stage", stage},
                      {"version", kToolVersion},
                      {"modules", module_versions()},
                      {"config", config},
                      {"inputs", inputs}};
    return sha256_hex(doc.dump());
}

void write_text(const fs::path& path, const std::string& text)
{
    auto out = csv::open_output(path);
    out << text;
    out.flush();
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

struct Manifest {
    std::string stage;
    json config;
    json inputs = json::object();
    json extra = json::object();
    std::vector<std::string> outputs;
    std::string digest;
    std::map<std::string, double> timings_ms;
    unsigned threads = 1;

    void write(const fs::path& dir) const
    {
        json doc = {{"stage", stage},
                    {"tool_version", kToolVersion},
                    {"module_versions", module_versions()},
                    {"config", config},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"run_digest", digest},
                    {"threads", threads},
                    {"timings_ms", timings_ms}};
        for (const auto& [k, v] : extra.items()) {
            doc[k] = v;
        }
        write_text(dir / kManifestName, doc.dump(2) + "\n");
    }
};

/// Loads the manifest of an upstream stage or raises PipelineOrderError
/// naming the command that must run first.
json require_stage(const fs::path& dir, std::string_view stage)
{
    const fs::path path = dir / kManifestName;
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::PipelineOrderError, "no `" + std::string(stage) + "` outputs in " + dir.string() +
                                                  ": run `xdrmob " + std::string(stage) + "` first");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::SchemaError, "unreadable manifest " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("stage", std::string{}) != stage) {
        throw Error(Errc::PipelineOrderError, dir.string() + " does not hold `" + std::string(stage) +
                                                  "` outputs: run `xdrmob " + std::string(stage) + "` first");
    }
    return doc;
}

void require_file(const fs::path& path)
{
    if (!fs::is_regular_file(path)) {
        throw Error(Errc::IoError, "missing input file " + path.string());
    }
}

double elapsed_ms(Clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoError, "cannot open " + path.string());
    }
    return in;
}

bool by_time(const XdrEvent& a, const XdrEvent& b)
{
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.antenna_id < b.antenna_id;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth

void cmd_synth(const SynthArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    synth::ScenarioConfig config = args.config ? synth::load_config(*args.config) : synth::ScenarioConfig{};
    if (opts.seed) {
        config.seed = *opts.seed;
    }
    config.validate();
    Manifest m;
    m.stage = "synth";
    m.config = json::parse(synth::to_json_text(config));
    m.config["format"] = to_string(opts.format);
    if (args.config) {
        m.inputs["config"] = sha256_file(*args.config);
    }
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;

    const synth::World world = synth::generate_world(config);
    m.timings_ms["generate_world"] = elapsed_ms(t0);
    const auto t1 = Clock::now();
    synth::write_scenario(world, args.out, opts.format, opts.threads, preamble_for(m.digest));
    m.timings_ms["write"] = elapsed_ms(t1);

    json scenario = json::parse(synth::to_json_text(config));
    scenario["run_digest"] = m.digest;
    write_text(args.out / "scenario.json", scenario.dump(2) + "\n");

    m.outputs = {"scenario.json",    "comunas.csv",        "antennas.csv",           "quarantines.csv",
                 synth::xdr_file_name(opts.format), "ground_truth.csv", "ground_truth_weekly.csv",
                 "planned_intensity.csv"};
    m.extra["agents"] = world.agents.size();
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// homes

void cmd_homes(const HomesArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    require_file(args.xdr);
    require_file(args.antennas);
    const StudyWindow window = opts.window();

    Manifest m;
    m.stage = "homes";
    m.config = window_json(window);
    m.config["min_night_events"] = opts.min_night_events;
    m.config["max_drop_fraction"] = opts.max_drop_fraction;
    m.inputs["xdr"] = sha256_file(args.xdr);
    m.inputs["antennas"] = sha256_file(args.antennas);
    std::optional<ComunaTable> comunas;
    if (args.comunas) {
        m.inputs["comunas"] = sha256_file(*args.comunas);
        comunas = load_comunas(*args.comunas);
    }
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;
    const AntennaRegistry registry = load_antennas(args.antennas, comunas ? &*comunas : nullptr);
    m.timings_ms["load"] = elapsed_ms(t0);

    const auto t1 = Clock::now();
    auto in = open_input(args.xdr);
    XdrReader reader(in, window, registry);
    DeviceBatcher batcher(reader);
    HomeSeriesWriter writer(args.out / "homes_weekly.csv", args.out / "homes.csv", preamble_for(m.digest));
    std::vector<XdrEvent> events;
    std::vector<DeviceSlice> devices;
    std::vector<HomeSeries> results;
    std::uint64_t n_devices = 0;
    while (batcher.next(events, devices)) {
        results.assign(devices.size(), HomeSeries{});
        parallel_for(devices.size(), opts.threads, [&](std::size_t i, unsigned) {
            const DeviceSlice& d = devices[i];
            results[i] = build_home_series(d.device_id,
                                           std::span<const XdrEvent>(events).subspan(d.begin, d.end - d.begin),
                                           window, registry, opts.min_night_events);
        });
        for (const auto& s : results) {
            writer.write(s);
        }
        n_devices += devices.size();
    }
    check_drop_rate(reader.stats(), opts.max_drop_fraction);
    writer.close();
    m.timings_ms["infer"] = elapsed_ms(t1);
    m.outputs = {"homes_weekly.csv", "homes.csv"};
    m.extra["ingest"] = ingest_json(reader.stats());
    m.extra["devices"] = n_devices;
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// migrate

void cmd_migrate(const MigrateArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    const json upstream = require_stage(args.homes, "homes");
    const StudyWindow window = window_from(upstream.at("config"));
    require_file(args.comunas);

    Manifest m;
    m.stage = "migrate";
    m.config = window_json(window);
    m.inputs["homes_weekly"] = sha256_file(args.homes / "homes_weekly.csv");
    m.inputs["homes"] = sha256_file(args.homes / "homes.csv");
    m.inputs["comunas"] = sha256_file(args.comunas);
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;

    const ComunaTable comunas = load_comunas(args.comunas);
    const auto series = load_home_series(args.homes / "homes_weekly.csv", args.homes / "homes.csv", window);
    std::vector<MigrationRecord> records;
    records.reserve(series.size());
    std::uint64_t migrated = 0;
    for (const auto& s : series) {
        if (auto r = classify(s, comunas)) {
            migrated += r->migrated ? 1 : 0;
            records.push_back(*r);
        }
    }
    const std::string preamble = preamble_for(m.digest);
    write_records(args.out / "records.csv", records, preamble);

    const OdMatrix od = build_od(records, comunas, FlowDirection::Emigration, Level::Comuna);
    auto out = csv::open_output(args.out / "od_counts.csv");
    out << preamble << '\n' << "origin,destination,count\n";
    for (std::size_t r = 0; r < od.counts.rows.size(); ++r) {
        for (std::size_t c = 0; c < od.counts.cols.size(); ++c) {
            if (od.counts.at(r, c) > 0) {
                out << od.counts.rows[r] << ',' << od.counts.cols[c] << ',' << od.counts.at(r, c) << '\n';
            }
        }
    }
    out.close();
    if (!out) {
        throw Error(Errc::IoError, "write failed: od_counts.csv");
    }
    m.timings_ms["classify"] = elapsed_ms(t0);
    m.outputs = {"records.csv", "od_counts.csv"};
    m.extra["devices"] = series.size();
    m.extra["classified"] = records.size();
    m.extra["migrated"] = migrated;
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// indices

void cmd_indices(const IndicesArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    const json upstream = require_stage(args.homes, "homes");
    const StudyWindow window = window_from(upstream.at("config"));
    require_file(args.xdr);
    require_file(args.antennas);
    require_file(args.quarantines);

    Manifest m;
    m.stage = "indices";
    m.config = window_json(window);
    m.config["max_drop_fraction"] = opts.max_drop_fraction;
    m.inputs["xdr"] = sha256_file(args.xdr);
    m.inputs["antennas"] = sha256_file(args.antennas);
    m.inputs["homes_weekly"] = sha256_file(args.homes / "homes_weekly.csv");
    m.inputs["homes"] = sha256_file(args.homes / "homes.csv");
    m.inputs["quarantines"] = sha256_file(args.quarantines);
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;

    const AntennaRegistry registry = load_antennas(args.antennas);
    const QuarantineSchedule schedule = load_quarantines(args.quarantines);
    const auto homes = load_home_series(args.homes / "homes_weekly.csv", args.homes / "homes.csv", window);
    m.timings_ms["load"] = elapsed_ms(t0);

    const auto t1 = Clock::now();
    const unsigned threads = std::max(1u, opts.threads);
    std::vector<TripAccumulator> partial(threads, TripAccumulator(window));
    auto in = open_input(args.xdr);
    XdrReader reader(in, window, registry);
    DeviceBatcher batcher(reader);
    std::vector<XdrEvent> events;
    std::vector<DeviceSlice> devices;
    while (batcher.next(events, devices)) {
        parallel_for(devices.size(), threads, [&](std::size_t i, unsigned worker) {
            const DeviceSlice& d = devices[i];
            auto it = std::lower_bound(homes.begin(), homes.end(), d.device_id,
                                       [](const HomeSeries& s, DeviceId id) { return s.device_id < id; });
            if (it == homes.end() || it->device_id != d.device_id) {
                return;
            }
            std::sort(events.begin() + static_cast<std::ptrdiff_t>(d.begin),
                      events.begin() + static_cast<std::ptrdiff_t>(d.end), by_time);
            partial[worker].add_device(*it, std::span<const XdrEvent>(events).subspan(d.begin, d.end - d.begin),
                                       registry);
        });
    }
    check_drop_rate(reader.stats(), opts.max_drop_fraction);
    TripAccumulator total(window);
    for (const auto& p : partial) {
        total.merge(p);
    }
    const auto counts = total.counts();
    const auto series = build_index_series(counts, window);
    const auto summary = summarize(series, schedule);
    m.timings_ms["index"] = elapsed_ms(t1);

    const std::string preamble = preamble_for(m.digest);
    write_trip_counts(args.out / "trip_counts.csv", counts, preamble);
    write_index_daily(args.out / "index_daily.csv", series, preamble);
    write_index_summary(args.out / "index_summary.csv", summary, preamble);
    m.outputs = {"trip_counts.csv", "index_daily.csv", "index_summary.csv"};
    m.extra["ingest"] = ingest_json(reader.stats());
    json no_baseline = json::array();
    for (const auto& s : series) {
        if (s.no_baseline) {
            no_baseline.push_back(s.comuna_id);
        }
    }
    m.extra["no_baseline"] = no_baseline;
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// analyze

namespace {

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json fit_json(const stats::RegressionFit& f)
{
    return {{"slope", number_or_null(f.slope)},
            {"intercept", number_or_null(f.intercept)},
            {"r", number_or_null(f.r)},
            {"r2", number_or_null(f.r2)},
            {"n", f.n},
            {"p_value", number_or_null(f.p_value)}};
}

json correlation_json(const CensusCorrelation& c)
{
    return {{"n", c.n}, {"r", number_or_null(c.r)}, {"df", c.df}, {"p_value", number_or_null(c.p_value)}};
}

/// Runs an analysis step; data-dependent failures become {"error": ...}.
template <class F>
json guarded(F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        switch (e.code()) {
        case Errc::InsufficientData:
        case Errc::DegenerateData:
        case Errc::DegenerateOrigin:
        case Errc::DegenerateGeometry:
        case Errc::NoBaseline: return json{{"error", e.what()}};
        default: throw;
        }
    }
}

json values_json(const OriginValues& v)
{
    json out = json::object();
    for (const auto& [id, value] : v.values) {
        out[std::to_string(id)] = number_or_null(value);
    }
    return out;
}

struct YearInput {
    int year = 0;
    fs::path dir;
    std::vector<MigrationRecord> records;
};

struct YearTables {
    OdMatrix od_comuna;
    OdMatrix od_region;
    OdMatrix od_immigration;
    PctMatrix pct;
    std::vector<HostingImpact> hosting;
};

std::vector<double> row_sums(const PctMatrix& m)
{
    std::vector<double> out(m.rows.size(), 0.0);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            out[r] += m.at(r, c);
        }
    }
    return out;
}

class CsvOut {
public:
    CsvOut(const fs::path& path, const std::string& preamble, std::string_view header)
        : path_(path), out_(csv::open_output(path))
    {
        out_ << preamble << '\n' << header << '\n';
    }
    std::ofstream& operator*() { return out_; }
    void close()
    {
        out_.close();
        if (!out_) {
            throw Error(Errc::IoError, "write failed: " + path_.string());
        }
    }

private:
    fs::path path_;
    std::ofstream out_;
};

std::string fmt(double v)
{
    return csv::format_double(v);
}

}  // namespace

void cmd_analyze(const AnalyzeArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    if (args.migrations.empty()) {
        throw Error(Errc::ValidationError, "analyze needs at least one --migration directory");
    }
    std::vector<YearInput> years;
    Manifest m;
    m.stage = "analyze";
    m.config = json::object();
    for (const auto& dir : args.migrations) {
        const json upstream = require_stage(dir, "migrate");
        YearInput y;
        y.year = window_from(upstream.at("config")).year();
        y.dir = dir;
        for (const auto& other : years) {
            if (other.year == y.year) {
                throw Error(Errc::ValidationError, "two migration inputs for year " + std::to_string(y.year));
            }
        }
        m.inputs["records_" + std::to_string(y.year)] = sha256_file(dir / "records.csv");
        years.push_back(std::move(y));
    }
    std::optional<json> indices_manifest;
    if (args.indices) {
        indices_manifest = require_stage(*args.indices, "indices");
        m.inputs["index_summary"] = sha256_file(*args.indices / "index_summary.csv");
    }
    require_file(args.comunas);
    m.inputs["comunas"] = sha256_file(args.comunas);
    if (args.census) {
        require_file(*args.census);
        m.inputs["census"] = sha256_file(*args.census);
    }
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;
    const std::string preamble = preamble_for(m.digest);

    std::sort(years.begin(), years.end(), [](const YearInput& a, const YearInput& b) { return a.year < b.year; });
    const ComunaTable comunas = load_comunas(args.comunas);
    for (auto& y : years) {
        y.records = load_records(y.dir / "records.csv");
    }
    const int base_year = years.front().year;
    const auto regions = aggregate_regions(comunas);
    const GeoPoint scl = scl_centroid(comunas);

    std::map<int, YearTables> tables;
    for (const auto& y : years) {
        YearTables t;
        t.od_comuna = build_od(y.records, comunas, FlowDirection::Emigration, Level::Comuna);
        t.od_region = build_od(y.records, comunas, FlowDirection::Emigration, Level::Region);
        t.od_immigration = build_od(y.records, comunas, FlowDirection::Immigration, Level::Comuna);
        t.pct = emigration_pct(t.od_comuna);
        t.hosting = hosting_impact(t.od_region, regions, comunas);
        tables.emplace(y.year, std::move(t));
    }

    json summary;
    summary["run_digest"] = m.digest;
    summary["base_year"] = base_year;
    summary["years"] = json::array();
    for (const auto& y : years) {
        summary["years"].push_back(y.year);
    }

    // Per-year tables.
    CsvOut od_counts(args.out / "od_counts.csv", preamble, "year,direction,level,origin,destination,count");
    CsvOut od_pct(args.out / "od_pct.csv", preamble, "year,origin,destination,pct");
    CsvOut net_rates(args.out / "net_rates.csv", preamble,
                     "year,comuna,immigrant_devices,emigrant_devices,immigrants,emigrants,population,rate");
    CsvOut icvu(args.out / "icvu_tradeoff.csv", preamble, "year,origin,tradeoff");
    CsvOut gravity(args.out / "gravity.csv", preamble,
                   "year,rank,region,population,distance_km,gravity_score,inflow_from_scl");
    CsvOut hosting(args.out / "hosting.csv", preamble,
                   "year,region,inflow_devices,inflow_persons,population,pct,pct_change_vs_base");

    json per_year = json::object();
    for (const auto& y : years) {
        const YearTables& t = tables.at(y.year);
        json entry;

        auto dump_counts = [&](const OdMatrix& od, std::string_view level) {
            for (std::size_t r = 0; r < od.counts.rows.size(); ++r) {
                for (std::size_t c = 0; c < od.counts.cols.size(); ++c) {
                    if (od.counts.at(r, c) > 0) {
                        *od_counts << y.year << ',' << to_string(od.direction) << ',' << level << ','
                                   << od.counts.rows[r] << ',' << od.counts.cols[c] << ',' << od.counts.at(r, c)
                                   << '\n';
                    }
                }
            }
        };
        dump_counts(t.od_comuna, "comuna");
        dump_counts(t.od_region, "region");
        dump_counts(t.od_immigration, "comuna");
        for (std::size_t r = 0; r < t.pct.rows.size(); ++r) {
            for (std::size_t c = 0; c < t.pct.cols.size(); ++c) {
                if (t.pct.at(r, c) != 0.0) {
                    *od_pct << y.year << ',' << t.pct.rows[r] << ',' << t.pct.cols[c] << ',' << fmt(t.pct.at(r, c))
                            << '\n';
                }
            }
        }

        const auto net = net_migration_table(y.records, comunas);
        for (const auto& n : net) {
            *net_rates << y.year << ',' << n.comuna_id << ',' << n.immigrant_devices << ',' << n.emigrant_devices
                       << ',' << fmt(n.immigrants) << ',' << fmt(n.emigrants) << ',' << fmt(n.population) << ','
                       << fmt(n.rate) << '\n';
        }
        const MigrationTotals totals = capital_totals(net);
        entry["capital_totals"] = {{"immigrants", totals.immigrants},
                                   {"emigrants", totals.emigrants},
                                   {"net_flow", totals.net_flow},
                                   {"population", totals.population},
                                   {"rate", totals.rate}};
        entry["devices_classified"] = y.records.size();

        entry["emigration_vs_decile"] = guarded([&] {
            const auto y_pct = row_sums(t.pct);
            std::vector<double> x;
            for (ComunaId id : t.pct.rows) {
                x.push_back(comunas.at(id).income_decile);
            }
            return fit_json(stats::ols(x, y_pct));
        });

        const OriginValues density = density_weighted_destination(t.pct, comunas);
        entry["density_regression"] = guarded([&] {
            std::vector<double> x;
            std::vector<double> v;
            for (const auto& [id, value] : density.values) {
                x.push_back(comunas.at(id).poverty_pct);
                v.push_back(value);
            }
            return fit_json(stats::ols(x, v));
        });
        entry["density_weighted_destination"] = values_json(density);

        const OriginValues trade = icvu_tradeoff(t.pct, comunas);
        for (const auto& [id, value] : trade.values) {
            *icvu << y.year << ',' << id << ',' << fmt(value) << '\n';
        }
        entry["icvu_tradeoff"] = values_json(trade);

        json grav = guarded([&] {
            const auto ranked = gravity_rank(regions, scl, &t.od_region);
            json rows = json::array();
            std::vector<double> score;
            std::vector<double> inflow;
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto& g = ranked[i];
                *gravity << y.year << ',' << i + 1 << ',' << g.region_id << ',' << fmt(g.population) << ','
                         << fmt(g.distance_km) << ',' << fmt(g.gravity_score) << ',' << g.inflow_from_scl << '\n';
                rows.push_back({{"region", g.region_id},
                                {"gravity_score", g.gravity_score},
                                {"inflow_from_scl", g.inflow_from_scl}});
                score.push_back(g.gravity_score);
                inflow.push_back(static_cast<double>(g.inflow_from_scl));
            }
            json out = {{"ranking", rows}};
            out["score_vs_inflow"] = guarded([&] {
                const auto c = stats::pearson(score, inflow);
                return json{{"r", c.r}, {"n", c.n}, {"p_value", c.p_value}};
            });
            return out;
        });
        entry["gravity"] = grav;

        const auto base_hosting = tables.at(base_year).hosting;
        const auto diff = hosting_difference(t.hosting, base_hosting);
        json host = json::object();
        for (const auto& h : t.hosting) {
            *hosting << y.year << ',' << h.region_id << ',' << h.inflow_devices << ',' << fmt(h.inflow_persons) << ','
                     << fmt(h.population) << ',' << fmt(h.pct) << ',';
            if (y.year != base_year) {
                *hosting << fmt(diff.at(h.region_id));
            }
            *hosting << '\n';
            host[std::to_string(h.region_id)] = {{"pct", h.pct}, {"inflow_persons", h.inflow_persons}};
            if (y.year != base_year) {
                host[std::to_string(h.region_id)]["pct_change_vs_base"] = diff.at(h.region_id);
            }
        }
        entry["hosting"] = host;
        per_year[std::to_string(y.year)] = entry;
    }
    summary["per_year"] = per_year;
    od_counts.close();
    od_pct.close();
    net_rates.close();
    icvu.close();
    gravity.close();
    hosting.close();

    // Year-over-base comparisons.
    CsvOut od_diff(args.out / "od_diff.csv", preamble, "year,base_year,destination,origin,diff,z,kept");
    CsvOut divergence(args.out / "divergence.csv", preamble, "year,base_year,origin,w1_km");
    CsvOut rurality(args.out / "rurality_shift.csv", preamble, "year,base_year,origin,delta_r");
    json comparisons = json::object();
    const PctMatrix& base_pct = tables.at(base_year).pct;
    for (const auto& y : years) {
        if (y.year == base_year) {
            continue;
        }
        const PctMatrix& pct = tables.at(y.year).pct;
        json entry;
        auto [a, b] = align_union(base_pct, pct);
        const PctMatrix by_destination = transpose(matrix_difference(a, b));
        const ZScoreFilter filter = zscore_row_filter(by_destination);
        json kept = json::array();
        for (std::size_t r : filter.kept_rows) {
            kept.push_back(by_destination.rows[r]);
        }
        for (std::size_t r = 0; r < by_destination.rows.size(); ++r) {
            const bool is_kept = std::binary_search(filter.kept_rows.begin(), filter.kept_rows.end(), r);
            for (std::size_t c = 0; c < by_destination.cols.size(); ++c) {
                *od_diff << y.year << ',' << base_year << ',' << by_destination.rows[r] << ','
                         << by_destination.cols[c] << ',' << fmt(by_destination.at(r, c)) << ','
                         << fmt(filter.z[r * by_destination.cols.size() + c]) << ',' << (is_kept ? 1 : 0) << '\n';
            }
        }
        entry["z_filter"] = {{"mean", filter.mean}, {"stddev", filter.stddev}, {"kept_destinations", kept}};

        const OriginValues w1 = destination_divergence(pct, base_pct, comunas);
        for (const auto& [id, value] : w1.values) {
            *divergence << y.year << ',' << base_year << ',' << id << ',' << fmt(value) << '\n';
        }
        entry["divergence_km"] = values_json(w1);

        const OriginValues dr = rurality_shift(pct, base_pct, comunas);
        for (const auto& [id, value] : dr.values) {
            *rurality << y.year << ',' << base_year << ',' << id << ',' << fmt(value) << '\n';
        }
        entry["delta_r"] = values_json(dr);
        comparisons[std::to_string(y.year)] = entry;
    }
    od_diff.close();
    divergence.close();
    rurality.close();
    summary["comparisons"] = comparisons;

    // Daily mobility against income.
    if (args.indices) {
        const auto rows = load_index_summary(*args.indices / "index_summary.csv");
        std::map<ComunaId, double> reduction;
        std::map<ComunaId, double> quarantine;
        std::map<ComunaId, double> free;
        std::map<ComunaId, double> deciles;
        for (const auto& r : rows) {
            const ComunaProfile* p = comunas.find(r.comuna_id);
            if (p == nullptr || !p->in_scl) {
                continue;
            }
            if (r.mean_reduction) {
                reduction[r.comuna_id] = *r.mean_reduction;
                deciles[r.comuna_id] = p->income_decile;
            }
            if (r.quarantine_mean) {
                quarantine[r.comuna_id] = *r.quarantine_mean;
            }
            if (r.free_mean) {
                free[r.comuna_id] = *r.free_mean;
            }
        }
        auto decile_subset = [&](const std::map<ComunaId, double>& values) {
            std::map<ComunaId, double> d;
            for (const auto& [id, v] : values) {
                d[id] = comunas.at(id).income_decile;
            }
            return d;
        };
        json daily;
        daily["reduction_vs_decile"] = guarded([&] {
            std::vector<double> x;
            std::vector<double> v;
            for (const auto& [id, value] : reduction) {
                x.push_back(deciles.at(id));
                v.push_back(value);
            }
            return fit_json(stats::ols(x, v));
        });
        daily["quintile_share"] = {
            {"overall", guarded([&] { return json(stats::quintile_share(reduction, deciles)); })},
            {"quarantine", guarded([&] { return json(stats::quintile_share(quarantine, decile_subset(quarantine))); })},
            {"free", guarded([&] { return json(stats::quintile_share(free, decile_subset(free))); })}};
        daily["welch_top20_vs_bottom80"] = guarded([&] {
            const auto top = stats::top_quintile(deciles);
            std::vector<double> a;
            std::vector<double> b;
            for (const auto& [id, value] : reduction) {
                (std::binary_search(top.begin(), top.end(), id) ? a : b).push_back(value);
            }
            const auto t = stats::welch_t(a, b);
            return json{{"t", number_or_null(t.t)},
                        {"df", number_or_null(t.df)},
                        {"p_value", number_or_null(t.p_value)},
                        {"n_top", a.size()},
                        {"n_bottom", b.size()}};
        });
        summary["daily_mobility"] = daily;
    } else {
        summary["daily_mobility"] = nullptr;
    }

    // Census validation against the base year.
    json census_doc = {{"run_digest", m.digest}, {"year", base_year}};
    if (args.census) {
        const auto census = load_census(*args.census);
        const YearInput& base = years.front();
        json levels = json::object();
        for (const auto& [level, flows] : census) {
            levels[std::string(to_string(level))] = guarded([&] {
                const auto report = census_validation(model_flows(base.records, comunas, level), flows, level);
                return json{{"immigration", correlation_json(report.immigration)},
                            {"emigration", correlation_json(report.emigration)}};
            });
        }
        census_doc["levels"] = levels;
        summary["census"] = levels;
    } else {
        census_doc["levels"] = nullptr;
        summary["census"] = nullptr;
    }
    write_text(args.out / "census_validation.json", census_doc.dump(2) + "\n");
    write_text(args.out / "summary.json", summary.dump(2) + "\n");

    m.timings_ms["analyze"] = elapsed_ms(t0);
    m.outputs = {"od_counts.csv",     "od_pct.csv",    "od_diff.csv",     "net_rates.csv",
                 "divergence.csv",    "rurality_shift.csv", "icvu_tradeoff.csv", "gravity.csv",
                 "hosting.csv",       "census_validation.json", "summary.json"};
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// report

namespace {

std::string cell(const json& v)
{
    if (v.is_null()) {
        return "n/a";
    }
    if (v.is_number_float()) {
        std::ostringstream os;
        os.setf(std::ios::fixed);
        os.precision(4);
        os << v.get<double>();
        return os.str();
    }
    if (v.is_object() && v.contains("error")) {
        return "n/a (" + v.at("error").get<std::string>() + ")";
    }
    return v.dump();
}

void fit_line(std::ostream& out, std::string_view label, const json& fit)
{
    if (fit.is_object() && fit.contains("error")) {
        out << "| " << label << " | " << cell(fit) << " | | | |\n";
        return;
    }
    out << "| " << label << " | " << cell(fit.at("slope")) << " | " << cell(fit.at("r")) << " | "
        << cell(fit.at("r2")) << " | " << cell(fit.at("p_value")) << " |\n";
}

}  // namespace

void cmd_report(const ReportArgs& args, const RunOptions& opts)
{
    const auto t0 = Clock::now();
    require_stage(args.analysis, "analyze");
    const fs::path summary_path = args.analysis / "summary.json";
    require_file(summary_path);
    Manifest m;
    m.stage = "report";
    m.config = json::object();
    m.inputs["summary"] = sha256_file(summary_path);
    m.digest = run_digest(m.stage, m.config, m.inputs);
    m.threads = opts.threads;

    json summary;
    {
        std::ifstream in(summary_path);
        try {
            summary = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(Errc::SchemaError, std::string("unreadable summary.json: ") + e.what());
        }
    }

    std::ostringstream out;
    out << "<!-- run_digest=" << m.digest << " -->\n";
    out << "# Migration and mobility report\n\n";
    out << "Base year: " << summary.at("base_year") << "\n\n";
    out << "## Capital migration balance\n\n";
    out << "| year | immigrants | emigrants | net flow | rate (%) |\n|---|---|---|---|---|\n";
    for (const auto& [year, entry] : summary.at("per_year").items()) {
        const json& t = entry.at("capital_totals");
        out << "| " << year << " | " << cell(t.at("immigrants")) << " | " << cell(t.at("emigrants")) << " | "
            << cell(t.at("net_flow")) << " | " << cell(t.at("rate")) << " |\n";
    }
    out << "\n## Regressions\n\n| analysis | slope | r | r2 | p |\n|---|---|---|---|---|\n";
    for (const auto& [year, entry] : summary.at("per_year").items()) {
        fit_line(out, "emigration vs income decile, " + year, entry.at("emigration_vs_decile"));
        fit_line(out, "destination density vs poverty, " + year, entry.at("density_regression"));
    }
    const json& daily = summary.at("daily_mobility");
    if (!daily.is_null()) {
        fit_line(out, "mobility reduction vs income decile", daily.at("reduction_vs_decile"));
        out << "\n## Daily mobility\n\n";
        out << "Top-quintile share of mobility change: overall " << cell(daily.at("quintile_share").at("overall"))
            << ", quarantine " << cell(daily.at("quintile_share").at("quarantine")) << ", free "
            << cell(daily.at("quintile_share").at("free")) << "\n\n";
        const json& w = daily.at("welch_top20_vs_bottom80");
        if (w.contains("error")) {
            out << "Welch test: " << cell(w) << "\n";
        } else {
            out << "Welch test top 20% vs bottom 80%: t = " << cell(w.at("t")) << ", df = " << cell(w.at("df"))
                << ", p = " << cell(w.at("p_value")) << "\n";
        }
    }
    out << "\n## Gravity ranking\n\n";
    for (const auto& [year, entry] : summary.at("per_year").items()) {
        const json& g = entry.at("gravity");
        if (g.contains("error")) {
            out << "- " << year << ": " << cell(g) << "\n";
            continue;
        }
        out << "- " << year << ": regions by score";
        for (const auto& row : g.at("ranking")) {
            out << ' ' << row.at("region").dump();
        }
        out << "; score vs inflow r = "
            << (g.at("score_vs_inflow").contains("r") ? cell(g.at("score_vs_inflow").at("r"))
                                                       : cell(g.at("score_vs_inflow")))
            << "\n";
    }
    const json& census = summary.at("census");
    if (!census.is_null()) {
        out << "\n## Census validation\n\n| level | immigration r | emigration r |\n|---|---|---|\n";
        for (const auto& [level, v] : census.items()) {
            if (v.contains("error")) {
                out << "| " << level << " | " << cell(v) << " | |\n";
            } else {
                out << "| " << level << " | " << cell(v.at("immigration").at("r")) << " | "
                    << cell(v.at("emigration").at("r")) << " |\n";
            }
        }
    }
    write_text(args.out / "report.md", out.str());
    m.timings_ms["report"] = elapsed_ms(t0);
    m.outputs = {"report.md"};
    m.write(args.out);
}

// ---------------------------------------------------------------------------
// convert

IngestStats cmd_convert(const ConvertArgs& args, const RunOptions& opts)
{
    require_file(args.in);
    require_file(args.antennas);
    const StudyWindow window = opts.window();
    const AntennaRegistry registry = load_antennas(args.antennas);
    auto in = open_input(args.in);
    auto out = csv::open_output(args.out);
    XdrWriter writer(out, opts.format, window);
    IngestStats stats;
    if (opts.group) {
        std::vector<XdrEvent> events;
        stats = parse_xdr(in, window, registry, [&](const XdrEvent& e) { events.push_back(e); });
        std::stable_sort(events.begin(), events.end(), [](const XdrEvent& a, const XdrEvent& b) {
            if (a.device_id != b.device_id) {
                return a.device_id < b.device_id;
            }
            return by_time(a, b);
        });
        for (const auto& e : events) {
            writer.write(e);
        }
    } else {
        stats = parse_xdr(in, window, registry, [&](const XdrEvent& e) { writer.write(e); });
    }
    writer.flush();
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + args.out.string());
    }
    check_drop_rate(stats, opts.max_drop_fraction);
    return stats;
}

}  // namespace xdrmob::cli
