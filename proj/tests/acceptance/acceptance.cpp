// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "synth_pipeline.hpp"
#include "test_util.hpp"
#include "xdrmob/home_inference.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/migration.hpp"
#include "xdrmob/mobility_index.hpp"
#include "xdrmob/pipeline.hpp"
#include "xdrmob/stats.hpp"
#include "xdrmob/synth.hpp"

namespace fs = std::filesystem;
using namespace xdrmob;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6)
{
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// File pipeline helpers

struct ScenarioRun {
    fs::path root;
    double seconds_to_records = 0.0;
};

ScenarioRun run_scenario(const fs::path& root, const nlohmann::json& config, const cli::RunOptions& opts,
                         bool with_indices)
{
    fs::create_directories(root);
    testing::write_file(root / "config.json", config.dump());
    ScenarioRun run{root, 0.0};
    const auto t0 = Clock::now();
    cli::cmd_synth({root / "config.json", root / "scenario"}, opts);
    const fs::path scen = root / "scenario";
    const fs::path xdr = scen / synth::xdr_file_name(opts.format);
    cli::cmd_homes({xdr, scen / "antennas.csv", scen / "comunas.csv", root / "homes"}, opts);
    cli::cmd_migrate({root / "homes", scen / "comunas.csv", root / "migrate"}, opts);
    run.seconds_to_records = seconds_since(t0);
    std::optional<fs::path> indices;
    if (with_indices) {
        cli::cmd_indices({xdr, scen / "antennas.csv", root / "homes", scen / "quarantines.csv", root / "indices"},
                         opts);
        indices = root / "indices";
    }
    cli::cmd_analyze({{root / "migrate"}, scen / "comunas.csv", std::nullopt, indices, root / "analyze"}, opts);
    if (with_indices) {
        cli::cmd_report({root / "analyze", root / "report"}, opts);
    }
    return run;
}

double record_accuracy(const fs::path& root)
{
    const auto truth = synth::load_ground_truth(root / "scenario" / "ground_truth.csv");
    const auto records = load_records(root / "migrate" / "records.csv");
    std::map<DeviceId, const MigrationRecord*> by_device;
    for (const auto& r : records) {
        by_device[r.device_id] = &r;
    }
    std::size_t ok = 0;
    for (const auto& t : truth) {
        auto it = by_device.find(t.agent_id);
        ok += it != by_device.end() && it->second->origin_comuna == t.origin_comuna &&
              it->second->destination_comuna == t.destination_comuna && it->second->migrated == t.migrated;
    }
    return truth.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// 1. Ground-truth round trip

Outcome ground_truth_round_trip(const fs::path& tmp)
{
    nlohmann::json config{{"seed", 42}, {"n_agents", 10000}, {"noise", 0.0}, {"migration_rate", 0.12}};
    cli::RunOptions opts;
    opts.threads = 1;
    const auto clean = run_scenario(tmp / "gt_clean", config, opts, false);
    const double acc_clean = record_accuracy(clean.root);
    config["noise"] = 0.1;
    const auto noisy = run_scenario(tmp / "gt_noisy", config, opts, false);
    const double acc_noisy = record_accuracy(noisy.root);
    fs::remove_all(tmp / "gt_clean");
    fs::remove_all(tmp / "gt_noisy");
    return {acc_clean == 1.0 && clean.seconds_to_records < 60.0 && acc_noisy >= 0.97,
            "accuracy " + fmt(100 * acc_clean) + "% in " + fmt(clean.seconds_to_records, 3) +
                " s (limit 60 s); noise 0.1 accuracy " + fmt(100 * acc_noisy) + "% (need >= 97%)"};
}

// ---------------------------------------------------------------------------
// 2. Weekly home against a count-and-argmax oracle

// Night start date in local time, if the event falls in a Mon-Fri night
// inside the window. Calendar arithmetic only, independent of the library.
std::optional<Date> oracle_night(std::int64_t utc, int tz_hours, const StudyWindow& window)
{
    const std::int64_t local = utc + static_cast<std::int64_t>(tz_hours) * 3600;
    std::int64_t day = local / 86400;
    std::int64_t sec = local % 86400;
    if (sec < 0) {
        sec += 86400;
        --day;
    }
    if (sec < 7 * 3600) {
        --day;
    } else if (sec < 22 * 3600) {
        return std::nullopt;
    }
    const Date d{std::chrono::days{day}};
    const std::chrono::weekday wd{d};
    if (wd == std::chrono::Saturday || wd == std::chrono::Sunday || !window.contains(d)) {
        return std::nullopt;
    }
    return d;
}

Outcome weekly_home_oracle()
{
    const int tz = -4;
    const StudyWindow window(2020, tz);
    std::vector<Antenna> ants;
    for (AntennaId a = 1; a <= 8; ++a) {
        ants.push_back({a * 7, -33.0, -70.0, 13100 + a % 3});
    }
    std::vector<ComunaProfile> profiles;
    for (ComunaId c = 13100; c < 13103; ++c) {
        ComunaProfile p;
        p.comuna_id = c;
        p.region_id = 13;
        p.in_scl = true;
        profiles.push_back(p);
    }
    const ComunaTable comunas(profiles);
    const AntennaRegistry registry(ants, &comunas);
    const auto weeks = window.weeks();

    std::mt19937_64 gen(2020);
    std::uniform_int_distribution<std::size_t> week_pick(0, weeks.size() - 1);
    std::uniform_int_distribution<int> n_events(0, 14);
    std::uniform_int_distribution<int> pool_size(1, 8);
    std::uniform_int_distribution<int> min_events(1, 5);
    // bias towards night hours so that most weeks resolve
    std::uniform_int_distribution<int> night_second(22 * 3600, 31 * 3600 - 1);
    std::uniform_int_distribution<int> any_second(0, 86399);
    std::uniform_int_distribution<int> day_offset(0, 6);

    int matches = 0, ties = 0, resolved = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const Date week = weeks[week_pick(gen)];
        const int k = pool_size(gen);
        const unsigned threshold = static_cast<unsigned>(min_events(gen));
        std::uniform_int_distribution<int> which(0, k - 1);
        std::vector<XdrEvent> events;
        const int n = n_events(gen);
        for (int i = 0; i < n; ++i) {
            const Date day = week + std::chrono::days{day_offset(gen)};
            const int sec = gen() % 4 == 0 ? any_second(gen) : night_second(gen);
            const std::int64_t ts =
                window.to_utc(day, 0) + sec;  // may spill into the next morning, as nights do
            if (!window.contains(ts)) {
                continue;
            }
            events.push_back({1, ts, ants[static_cast<std::size_t>(which(gen))].antenna_id});
        }
        std::shuffle(events.begin(), events.end(), gen);

        std::map<AntennaId, unsigned> count;
        unsigned total = 0;
        for (const auto& e : events) {
            if (oracle_night(e.timestamp, tz, window)) {
                ++count[e.antenna_id];
                ++total;
            }
        }
        std::optional<ComunaId> expected;
        if (total >= threshold && total > 0) {
            unsigned best = 0;
            for (const auto& [a, c] : count) {
                best = std::max(best, c);
            }
            AntennaId winner = 0;
            int n_best = 0;
            for (const auto& [a, c] : count) {
                if (c == best) {
                    n_best += 1;
                    if (winner == 0) {
                        winner = a;  // map iterates ascending
                    }
                }
            }
            ties += n_best > 1;
            expected = *registry.comuna_of(winner);
        }
        const auto night = night_weekday_filter(events, window);
        const auto got = weekly_home(night, registry, threshold);
        matches += got == expected;
        resolved += expected.has_value();
    }
    return {matches == trials && ties > 0,
            std::to_string(matches) + "/" + std::to_string(trials) + " device-weeks agree (" +
                std::to_string(resolved) + " resolved, " + std::to_string(ties) + " with ties)"};
}

// ---------------------------------------------------------------------------
// 3. Wasserstein exactness

Outcome wasserstein_exactness()
{
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> lat(-45.0, -18.0);
    std::uniform_real_distribution<double> lon(-74.0, -68.0);
    double worst = 0.0;
    int identical_nonzero = 0;
    const int pairs = 500;
    for (int trial = 0; trial < pairs; ++trial) {
        const std::size_t n = static_cast<std::size_t>(dim(gen));
        std::vector<ComunaProfile> profiles;
        ComunaProfile origin;
        origin.comuna_id = 13101;
        origin.region_id = 13;
        origin.in_scl = true;
        origin.centroid_lat = -33.45;
        origin.centroid_lon = -70.65;
        profiles.push_back(origin);
        std::vector<std::uint32_t> dests;
        for (std::size_t i = 0; i < n; ++i) {
            ComunaProfile p;
            p.comuna_id = static_cast<ComunaId>(1101 + 1000 * i);
            p.region_id = static_cast<RegionId>(1 + i);
            p.centroid_lat = lat(gen);
            p.centroid_lon = lon(gen);
            profiles.push_back(p);
            dests.push_back(p.comuna_id);
        }
        std::sort(dests.begin(), dests.end());
        const ComunaTable comunas(profiles);
        auto draw = [&] {
            std::vector<double> v(n);
            for (auto& x : v) {
                x = u(gen) < 0.3 ? 0.0 : 100.0 * u(gen);
            }
            v[static_cast<std::size_t>(gen() % n)] += 1.0;
            return v;
        };
        const auto a = draw();
        const auto b = draw();
        PctMatrix ma({13101}, dests), mb({13101}, dests);
        ma.cells = a;
        mb.cells = b;
        const auto got = destination_divergence(ma, mb, comunas);
        const auto same = destination_divergence(ma, ma, comunas);
        identical_nonzero += same.values.at(13101) != 0.0;

        // oracles on normalized masses with the full haversine metric
        const double sa = std::accumulate(a.begin(), a.end(), 0.0);
        const double sb = std::accumulate(b.begin(), b.end(), 0.0);
        std::vector<double> p(n), q(n), d(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = a[i] / sa;
            q[i] = b[i] / sb;
            for (std::size_t j = 0; j < n; ++j) {
                const auto& x = comunas.at(dests[i]);
                const auto& y = comunas.at(dests[j]);
                d[i * n + j] = haversine_km(x.centroid_lat, x.centroid_lon, y.centroid_lat, y.centroid_lon);
            }
        }
        const double dual = oracle::kr_dual_w1(p, q, d);
        // primal basis enumeration over surplus -> deficit points
        std::vector<double> supply, demand, cost;
        std::vector<std::size_t> src, dst;
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] > q[i]) {
                src.push_back(i);
                supply.push_back(p[i] - q[i]);
            } else if (q[i] > p[i]) {
                dst.push_back(i);
                demand.push_back(q[i] - p[i]);
            }
        }
        double primal = 0.0;
        if (!src.empty() && !dst.empty()) {
            const double ts = std::accumulate(supply.begin(), supply.end(), 0.0);
            const double td = std::accumulate(demand.begin(), demand.end(), 0.0);
            demand.back() += ts - td;  // rounding residue only
            for (std::size_t i : src) {
                for (std::size_t j : dst) {
                    cost.push_back(d[i * n + j]);
                }
            }
            primal = oracle::brute_transport(supply, demand, cost);
        }
        const double w = got.values.at(13101);
        worst = std::max({worst, std::abs(w - dual), std::abs(w - primal)});
    }
    return {worst <= 1e-9 && identical_nonzero == 0,
            std::to_string(pairs) + " pairs, max |W1 - oracle| = " + fmt(worst, 3) + " km (tol 1e-9); " +
                std::to_string(identical_nonzero) + " identical pairs with non-zero distance"};
}

// ---------------------------------------------------------------------------
// 4. Statistics kernel

Outcome statistics_kernel()
{
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<std::size_t> size(3, 200);
    std::uniform_real_distribution<double> rho(-0.99, 0.99);
    std::uniform_real_distribution<double> scale(0.01, 1000.0);
    std::normal_distribution<double> z(0.0, 1.0);
    double worst = 0.0;
    double worst_r2 = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(gen);
        const double r = rho(gen);
        const double sx = scale(gen), sy = scale(gen), mx = 100.0 * z(gen), my = 100.0 * z(gen);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = z(gen), b = z(gen);
            x[i] = mx + sx * a;
            y[i] = my + sy * (r * a + std::sqrt(1.0 - r * r) * b);
        }
        const auto pr = stats::pearson(x, y);
        const auto hp_r = oracle::hp_pearson(x, y);
        const auto fit = stats::ols(x, y);
        const auto hp_line = oracle::hp_normal_equations(x, y);
        // Welch on two unequal groups built from the same draws
        const std::size_t split = std::max<std::size_t>(2, n / 3);
        const std::vector<double> g1(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(split));
        std::vector<double> g2(y.begin() + static_cast<std::ptrdiff_t>(split), y.end());
        if (g2.size() < 2) {
            g2 = {y[0], y[1]};
        }
        const auto wt = stats::welch_t(g1, g2);
        const auto hp_w = oracle::hp_welch(g1, g2);
        auto dev = [](double got, const oracle::hp& ref) { return std::abs(got - static_cast<double>(ref)); };
        worst = std::max({worst, dev(pr.r, hp_r.r), dev(pr.p_value, hp_r.p), dev(fit.slope, hp_line.slope),
                          dev(fit.intercept, hp_line.intercept), dev(fit.r, hp_r.r), dev(fit.p_value, hp_r.p),
                          dev(wt.t, hp_w.t), dev(wt.df, hp_w.df), dev(wt.p_value, hp_w.p)});
        worst_r2 = std::max(worst_r2, std::abs(fit.r2 - fit.r * fit.r));
    }
    double worst_line = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double slope = (trial % 2 ? -1.0 : 1.0) * (0.5 + trial);
        std::vector<double> x, y;
        for (int i = 0; i < 5 + trial; ++i) {
            x.push_back(0.37 * i - 2.0);
            y.push_back(slope * x.back() + 3.0);
        }
        const double sign = slope > 0 ? 1.0 : -1.0;
        const auto fit = stats::ols(x, y);
        worst_line = std::max({worst_line, std::abs(stats::pearson(x, y).r - sign), std::abs(fit.r - sign),
                               std::abs(fit.r2 - 1.0)});
    }
    return {worst <= 1e-8 && worst_line <= 1e-12 && worst_r2 <= 1e-12,
            "max deviation from 50-digit oracle " + fmt(worst, 3) + " (tol 1e-8); perfect lines off by " +
                fmt(worst_line, 3) + " (tol 1e-12); |r2 - r^2| <= " + fmt(worst_r2, 3) + " (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// 5 and 6. Mobility index on a 30-comuna synthetic run

struct IndexRun {
    synth::World world;
    std::vector<TripCounts> counts;
    std::vector<IndexSeries> series;
};

const IndexRun& index_run()
{
    static const IndexRun run = [] {
        synth::ScenarioConfig cfg;
        cfg.seed = 42;
        cfg.n_agents = 10000;
        cfg.n_comunas = 30;
        cfg.quarantine_drop = 0.30;
        IndexRun r{synth::generate_world(cfg), {}, {}};
        auto mem = testing::run_in_memory(r.world, true);
        r.counts = std::move(mem.counts);
        r.series = std::move(mem.series);
        return r;
    }();
    return run;
}

Outcome index_decomposition()
{
    const auto& run = index_run();
    const StudyWindow& window = run.world.window;
    std::map<std::pair<ComunaId, Date>, const TripCounts*> by_key;
    for (const auto& c : run.counts) {
        by_key[{c.comuna_id, c.date}] = &c;
    }
    std::size_t days_checked = 0, mismatches = 0;
    double worst_baseline = 0.0;
    std::size_t comunas_with_baseline = 0;
    for (const auto& s : run.series) {
        for (const auto& d : s.days) {
            auto it = by_key.find({s.comuna_id, d.date});
            if (it == by_key.end()) {
                mismatches += d.im_total.has_value();
                continue;
            }
            const TripCounts& c = *it->second;
            const double n = static_cast<double>(c.active_devices);
            const double internal = static_cast<double>(c.internal_trips) / n;
            const double external = static_cast<double>(c.external_trips) / n;
            ++days_checked;
            mismatches += !(d.im_internal && d.im_external && d.im_total && *d.im_internal == internal &&
                            *d.im_external == external && *d.im_total == *d.im_internal + *d.im_external);
        }
        if (!s.baseline_total || *s.baseline_total == 0.0) {
            continue;
        }
        ++comunas_with_baseline;
        for (auto member : {&IndexDay::change_total, &IndexDay::change_internal, &IndexDay::change_external}) {
            double sum = 0.0;
            int n = 0;
            for (const auto& d : s.days) {
                if (d.date >= window.baseline_week() && d.date < window.baseline_week() + std::chrono::days{7} &&
                    (d.*member).has_value()) {
                    sum += *(d.*member);
                    ++n;
                }
            }
            if (n > 0) {
                worst_baseline = std::max(worst_baseline, std::abs(sum / n));
            }
        }
    }
    return {mismatches == 0 && days_checked > 0 && comunas_with_baseline == run.series.size() &&
                worst_baseline <= 1e-12,
            std::to_string(days_checked) + " comuna-days, " + std::to_string(mismatches) +
                " decomposition mismatches; max |baseline-week mean change| = " + fmt(worst_baseline, 3) +
                " over " + std::to_string(comunas_with_baseline) + " comunas (tol 1e-12)"};
}

Outcome quarantine_stratification()
{
    const auto& run = index_run();
    double q_sum = 0.0;
    std::size_t q_days = 0;
    double worst_recompose = 0.0;
    std::size_t quarantined = 0;
    double all_sum = 0.0, all_strata = 0.0;
    std::size_t all_days = 0;
    for (const auto& s : run.series) {
        const auto r = stratify_by_quarantine(s, run.world.quarantines);
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& d : s.days) {
            if (d.change_total) {
                sum += *d.change_total;
                ++n;
            }
        }
        if (n == 0) {
            continue;
        }
        const double strata = (r.quarantine_mean ? *r.quarantine_mean * static_cast<double>(r.days_q) : 0.0) +
                              (r.free_mean ? *r.free_mean * static_cast<double>(r.days_free) : 0.0);
        worst_recompose =
            std::max(worst_recompose, std::abs(strata / static_cast<double>(r.days_q + r.days_free) - sum / n));
        all_sum += sum;
        all_strata += strata;
        all_days += n;
        if (r.quarantine_mean) {
            ++quarantined;
            q_sum += *r.quarantine_mean * static_cast<double>(r.days_q);
            q_days += r.days_q;
        }
    }
    worst_recompose = std::max(worst_recompose, std::abs(all_strata - all_sum) / static_cast<double>(all_days));
    const double q_mean = q_days ? q_sum / static_cast<double>(q_days) : 0.0;
    return {q_days > 0 && std::abs(q_mean + 30.0) <= 1.0 && worst_recompose <= 1e-9,
            "quarantine-stratum mean change " + fmt(q_mean, 5) + " pp over " + std::to_string(q_days) +
                " comuna-days in " + std::to_string(quarantined) + " comunas (target -30 +/- 1); recomposition error " +
                fmt(worst_recompose, 3) + " (tol 1e-9)"};
}

// ---------------------------------------------------------------------------
// 7. Rurality shift and density weighting

Outcome rurality_and_density()
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 12);
    double worst = 0.0;
    double min_shift = 0.0, max_shift = 0.0;
    std::size_t values = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n_origins = dim(gen), n_dests = dim(gen);
        std::vector<ComunaProfile> profiles;
        std::vector<std::uint32_t> rows, cols;
        for (int i = 0; i < n_origins; ++i) {
            ComunaProfile p;
            p.comuna_id = static_cast<ComunaId>(13101 + i);
            p.region_id = 13;
            p.in_scl = true;
            profiles.push_back(p);
            rows.push_back(p.comuna_id);
        }
        for (int j = 0; j < n_dests; ++j) {
            ComunaProfile p;
            p.comuna_id = static_cast<ComunaId>(5101 + j);
            p.region_id = 5;
            // extreme rurality values included
            p.rurality_pct = u(gen) < 0.2 ? std::round(u(gen)) : u(gen);
            p.population = 1.0 + 1e6 * u(gen);
            p.area_km2 = 0.5 + 5000.0 * u(gen);
            profiles.push_back(p);
            cols.push_back(p.comuna_id);
        }
        const ComunaTable comunas(profiles);
        auto draw = [&] {
            PctMatrix m(rows, cols);
            for (auto& c : m.cells) {
                c = u(gen) < 0.4 ? 0.0 : 100.0 * u(gen);
            }
            return m;
        };
        const PctMatrix t = draw();
        const PctMatrix t0 = draw();
        const auto shift = rurality_shift(t, t0, comunas);
        const auto density = density_weighted_destination(t, comunas);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double wt = 0, rt = 0, w0 = 0, r0 = 0, dens = 0;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const auto& p = comunas.at(cols[c]);
                wt += t.at(r, c);
                rt += t.at(r, c) * p.rurality_pct;
                w0 += t0.at(r, c);
                r0 += t0.at(r, c) * p.rurality_pct;
                dens += t.at(r, c) * (p.population / p.area_km2);
            }
            const bool defined = wt > 0 && w0 > 0;
            if (defined != shift.values.contains(rows[r]) || (wt > 0) != density.values.contains(rows[r])) {
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            if (defined) {
                const double expected = rt / wt - r0 / w0;
                const double got = shift.values.at(rows[r]);
                worst = std::max(worst, std::abs(got - expected));
                min_shift = std::min(min_shift, got);
                max_shift = std::max(max_shift, got);
                ++values;
            }
            if (wt > 0) {
                const double expected = dens / wt;
                worst = std::max(worst, std::abs(density.values.at(rows[r]) - expected) / std::max(1.0, expected));
            }
        }
    }
    return {worst <= 1e-12 && min_shift >= -1.0 && max_shift <= 1.0,
            std::to_string(values) + " origin shifts, max deviation " + fmt(worst, 3) +
                " (tol 1e-12, density relative); shift range [" + fmt(min_shift, 4) + ", " + fmt(max_shift, 4) + "]"};
}

// ---------------------------------------------------------------------------
// 8. Coupling detection

double emigration_r2(const fs::path& root)
{
    const auto summary = nlohmann::json::parse(testing::read_file(root / "analyze" / "summary.json"));
    const auto& per_year = summary.at("per_year");
    return per_year.begin()->at("emigration_vs_decile").at("r2").get<double>();
}

Outcome coupling_detection(const fs::path& tmp)
{
    cli::RunOptions opts;
    nlohmann::json config{{"seed", 42}, {"n_agents", 10000}, {"income_migration_coupling", 0.0}};
    run_scenario(tmp / "coupling0", config, opts, false);
    config["income_migration_coupling"] = 0.8;
    run_scenario(tmp / "coupling8", config, opts, false);
    const double r2_0 = emigration_r2(tmp / "coupling0");
    const double r2_8 = emigration_r2(tmp / "coupling8");
    fs::remove_all(tmp / "coupling0");
    fs::remove_all(tmp / "coupling8");
    return {r2_8 - r2_0 >= 0.3,
            "emigration-vs-decile r2 " + fmt(r2_8, 4) + " (coupling 0.8) vs " + fmt(r2_0, 4) +
                " (coupling 0), gap " + fmt(r2_8 - r2_0, 4) + " (need >= 0.3)"};
}

// ---------------------------------------------------------------------------
// 9. Census-validation harness

Outcome census_harness()
{
    const double rho = 0.9;
    std::mt19937_64 gen(9);
    std::normal_distribution<double> z(0.0, 1.0);
    double sum_imm = 0.0, sum_emi = 0.0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        DirectionalFlows model, census;
        for (int i = 0; i < 300; ++i) {
            const FlowKey key{std::to_string(13101 + i), "SCL"};
            // person-scale flows, kept positive
            for (auto side : {&DirectionalFlows::immigration, &DirectionalFlows::emigration}) {
                const double a = z(gen), b = z(gen);
                (model.*side)[key] = 5000.0 + 1000.0 * a;
                (census.*side)[key] = 5000.0 + 1000.0 * (rho * a + std::sqrt(1.0 - rho * rho) * b);
            }
        }
        const auto report = census_validation(model, census, CensusLevel::ComunasScl);
        sum_imm += report.immigration.r;
        sum_emi += report.emigration.r;
    }
    const double imm = sum_imm / trials, emi = sum_emi / trials;
    return {std::abs(imm - rho) <= 0.02 && std::abs(emi - rho) <= 0.02,
            "mean r immigration " + fmt(imm, 5) + ", emigration " + fmt(emi, 5) + " (target 0.9 +/- 0.02)"};
}

// ---------------------------------------------------------------------------
// 10. Determinism and ingestion throughput

std::map<std::string, std::string> snapshot(const fs::path& root)
{
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() != cli::kManifestName &&
            entry.path().filename() != "config.json") {
            files[fs::relative(entry.path(), root).string()] = testing::read_file(entry.path());
        }
    }
    return files;
}

/// Writes `n` device-grouped, time-sorted events that ingestion keeps.
void write_corpus(const fs::path& path, XdrFormat format, std::uint64_t n, const StudyWindow& window,
                  const std::vector<AntennaId>& antennas)
{
    std::ofstream out(path, std::ios::binary);
    XdrWriter writer(out, format, window);
    synth::Rng rng(10);
    const std::int64_t span = window.end_epoch() - window.start_epoch();
    const std::uint64_t per_device = 2000;
    std::vector<std::int64_t> ts(per_device);
    for (std::uint64_t written = 0, device = 1; written < n; ++device) {
        const std::uint64_t k = std::min(per_device, n - written);
        for (std::uint64_t i = 0; i < k; ++i) {
            ts[i] = window.start_epoch() + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span)));
        }
        std::sort(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::uint64_t i = 0; i < k; ++i) {
            writer.write({device, ts[i], antennas[rng.below(antennas.size())]});
        }
        written += k;
    }
    writer.flush();
    if (!out) {
        throw Error(Errc::IoError, "failed writing corpus " + path.string());
    }
}

double ingest_rate(const fs::path& path, const StudyWindow& window, const AntennaRegistry& registry,
                   std::uint64_t expected)
{
    std::ifstream in(path, std::ios::binary);
    std::uint64_t seen = 0;
    const auto t0 = Clock::now();
    const IngestStats st = parse_xdr(in, window, registry, [&](const XdrEvent&) { ++seen; });
    const double secs = seconds_since(t0);
    if (st.events_kept != expected || seen != expected) {
        throw Error(Errc::ValidationError, "corpus " + path.string() + " ingested " + std::to_string(seen) +
                                               " of " + std::to_string(expected) + " events");
    }
    return static_cast<double>(expected) / secs;
}

Outcome determinism_and_throughput(const fs::path& tmp)
{
    // byte-identical outputs across thread counts
    nlohmann::json config{{"seed", 42}, {"n_agents", 5000}, {"n_comunas", 40}};
    cli::RunOptions one;
    one.threads = 1;
    cli::RunOptions eight;
    eight.threads = 8;
    run_scenario(tmp / "threads1", config, one, true);
    run_scenario(tmp / "threads8", config, eight, true);
    const auto a = snapshot(tmp / "threads1");
    const auto b = snapshot(tmp / "threads8");
    const bool identical = a == b && !a.empty();
    fs::remove_all(tmp / "threads1");
    fs::remove_all(tmp / "threads8");

    // 100M-event corpus, one format at a time to bound disk use
    const std::uint64_t n = 100'000'000;
    const StudyWindow window(2020, -4);
    std::vector<Antenna> ants;
    std::vector<AntennaId> ids;
    for (AntennaId i = 1; i <= 2000; ++i) {
        ants.push_back({i * 3, -33.0, -70.0, 13101});
        ids.push_back(i * 3);
    }
    const AntennaRegistry registry(ants);
    const fs::path bin = tmp / "corpus.bin";
    write_corpus(bin, XdrFormat::Binary, n, window, ids);
    const double bin_rate = ingest_rate(bin, window, registry, n);
    fs::remove(bin);
    const fs::path csv = tmp / "corpus.csv";
    write_corpus(csv, XdrFormat::Csv, n, window, ids);
    const double csv_rate = ingest_rate(csv, window, registry, n);
    fs::remove(csv);

    return {identical && bin_rate >= 2e6 && csv_rate >= 3e5,
            std::string("threads 1 vs 8 ") + (identical ? "identical" : "DIFFER") + " over " +
                std::to_string(a.size()) + " files; binary " + fmt(bin_rate / 1e6, 4) + "M ev/s (need 2M), CSV " +
                fmt(csv_rate / 1e6, 4) + "M ev/s (need 0.3M) on 100M events"};
}

}  // namespace

// With arguments, runs only the listed criterion numbers.
int main(int argc, char** argv)
{
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) {
        only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
    }
    testing::TempDir tmp("acceptance");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ground-truth round trip", [&] { return ground_truth_round_trip(tmp.path()); }},
        {"weekly home oracle", weekly_home_oracle},
        {"wasserstein exactness", wasserstein_exactness},
        {"statistics kernel", statistics_kernel},
        {"index decomposition and baseline identity", index_decomposition},
        {"quarantine stratification", quarantine_stratification},
        {"rurality shift and density weighting", rurality_and_density},
        {"coupling detection", [&] { return coupling_detection(tmp.path()); }},
        {"census-validation harness", census_harness},
        {"determinism and throughput", [&] { return determinism_and_throughput(tmp.path()); }},
    };
    int failed = 0;
    std::size_t ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.contains(i + 1)) {
            continue;
        }
        ++ran;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
    }
    std::cout << (ran - static_cast<std::size_t>(failed)) << "/" << ran
              << " checks passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
