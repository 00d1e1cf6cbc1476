#include "xdrmob/migration.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "xdrmob/csv.hpp"
#include "xdrmob/stats.hpp"
#include "xdrmob/transport.hpp"

namespace xdrmob {

// ---------------------------------------------------------------------------
// Classification

std::optional<MigrationRecord> classify(DeviceId device, std::optional<ComunaId> baseline_home,
                                        std::optional<ComunaId> november_home, const ComunaTable& comunas)
{
    if (!baseline_home || !november_home) {
        return std::nullopt;
    }
    const ComunaProfile& origin = comunas.at(*baseline_home);
    const ComunaProfile& destination = comunas.at(*november_home);
    MigrationRecord rec;
    rec.device_id = device;
    rec.origin_comuna = origin.comuna_id;
    rec.destination_comuna = destination.comuna_id;
    rec.origin_region = origin.region_id;
    rec.destination_region = destination.region_id;
    rec.migrated = origin.region_id != destination.region_id;
    return rec;
}

std::optional<MigrationRecord> classify(const HomeSeries& series, const ComunaTable& comunas)
{
    return classify(series.device_id, series.baseline_home, series.november_home, comunas);
}

void write_records(const std::filesystem::path& path, std::span<const MigrationRecord> records,
                   std::string_view preamble)
{
    auto out = csv::open_output(path);
    if (!preamble.empty()) {
        out << preamble << '\n';
    }
    out << kRecordCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.device_id << ',' << r.origin_comuna << ',' << r.destination_comuna << ',' << r.origin_region << ','
            << r.destination_region << ',' << (r.migrated ? 1 : 0) << '\n';
    }
    if (!out) {
        throw Error(Errc::IoError, "write failed: " + path.string());
    }
}

std::vector<MigrationRecord> load_records(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kRecordCsvHeader);
    std::vector<MigrationRecord> records;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 6) {
            reader.fail(Errc::SchemaError, "expected 6 fields");
        }
        auto device = csv::parse_number<DeviceId>(f[0]);
        auto oc = csv::parse_number<ComunaId>(f[1]);
        auto dc = csv::parse_number<ComunaId>(f[2]);
        auto orr = csv::parse_number<RegionId>(f[3]);
        auto dr = csv::parse_number<RegionId>(f[4]);
        if (!device || !oc || !dc || !orr || !dr || (f[5] != "0" && f[5] != "1")) {
            reader.fail(Errc::ValidationError, "malformed migration record");
        }
        MigrationRecord r{*device, *oc, *dc, *orr, *dr, f[5] == "1"};
        if (r.migrated != (r.origin_region != r.destination_region)) {
            reader.fail(Errc::ValidationError, "migrated flag disagrees with regions");
        }
        records.push_back(r);
    }
    return records;
}

std::string_view to_string(FlowDirection direction) noexcept
{
    return direction == FlowDirection::Emigration ? "emigration" : "immigration";
}

// ---------------------------------------------------------------------------
// OD matrices

std::uint64_t OdMatrix::row_total(std::size_t r) const
{
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < counts.cols.size(); ++c) {
        s += counts.at(r, c);
    }
    return s;
}

std::uint64_t OdMatrix::total() const
{
    return std::accumulate(counts.cells.begin(), counts.cells.end(), std::uint64_t{0});
}

namespace {

std::uint32_t key_at(const ComunaProfile& p, Level level)
{
    return level == Level::Comuna ? p.comuna_id : p.region_id;
}

std::vector<std::uint32_t> sorted_unique(std::vector<std::uint32_t> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

OdMatrix build_od(std::span<const MigrationRecord> records, const ComunaTable& comunas, FlowDirection direction,
                  Level level)
{
    const bool emigration = direction == FlowDirection::Emigration;
    std::map<std::uint32_t, std::uint64_t> base;
    for (const auto& r : records) {
        const ComunaProfile& origin = comunas.at(r.origin_comuna);
        if (emigration ? origin.in_scl : origin.region_id != kMetropolitanRegion) {
            ++base[emigration ? origin.comuna_id : key_at(origin, level)];
        }
    }

    std::vector<std::uint32_t> rows;
    for (const auto& [label, n] : base) {
        if (n > 0) {
            rows.push_back(label);
        }
    }
    std::vector<std::uint32_t> cols;
    for (const auto& p : comunas.all()) {
        if (emigration && p.region_id != kMetropolitanRegion) {
            cols.push_back(key_at(p, level));
        } else if (!emigration && p.in_scl) {
            cols.push_back(p.comuna_id);
        }
    }
    cols = sorted_unique(std::move(cols));

    OdMatrix od;
    od.direction = direction;
    od.origin_level = emigration ? Level::Comuna : level;
    od.destination_level = emigration ? level : Level::Comuna;
    od.counts = LabeledMatrix<std::uint64_t>(rows, cols);
    od.origin_base.reserve(rows.size());
    for (std::uint32_t label : rows) {
        od.origin_base.push_back(base[label]);
    }

    for (const auto& r : records) {
        const ComunaProfile& origin = comunas.at(r.origin_comuna);
        const ComunaProfile& dest = comunas.at(r.destination_comuna);
        std::optional<std::size_t> ri;
        std::optional<std::size_t> ci;
        if (emigration) {
            if (!origin.in_scl || !r.migrated) {
                continue;
            }
            ri = od.counts.row_of(origin.comuna_id);
            ci = od.counts.col_of(key_at(dest, level));
        } else {
            if (origin.region_id == kMetropolitanRegion || !dest.in_scl) {
                continue;
            }
            ri = od.counts.row_of(key_at(origin, level));
            ci = od.counts.col_of(dest.comuna_id);
        }
        if (ri && ci) {
            ++od.counts.at(*ri, *ci);
        }
    }
    return od;
}

PctMatrix emigration_pct(const OdMatrix& od)
{
    PctMatrix pct(od.counts.rows, od.counts.cols);
    for (std::size_t r = 0; r < od.counts.rows.size(); ++r) {
        const std::uint64_t base = od.origin_base[r];
        if (base == 0) {
            throw Error(Errc::DegenerateOrigin, "origin " + std::to_string(od.counts.rows[r]) + " has no March devices");
        }
        for (std::size_t c = 0; c < od.counts.cols.size(); ++c) {
            pct.at(r, c) = 100.0 * static_cast<double>(od.counts.at(r, c)) / static_cast<double>(base);
        }
    }
    return pct;
}

double net_migration_rate(double immigrants, double emigrants, double population)
{
    if (!(population > 0.0)) {
        throw Error(Errc::ValidationError, "population must be positive");
    }
    return 100.0 * (immigrants - emigrants) / population;
}

PctMatrix realign(const PctMatrix& m, const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& cols)
{
    PctMatrix out(rows, cols);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        auto rr = out.row_of(m.rows[r]);
        if (!rr) {
            continue;
        }
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            if (auto cc = out.col_of(m.cols[c])) {
                out.at(*rr, *cc) = m.at(r, c);
            }
        }
    }
    return out;
}

std::pair<PctMatrix, PctMatrix> align_union(const PctMatrix& a, const PctMatrix& b)
{
    std::vector<std::uint32_t> rows = a.rows;
    rows.insert(rows.end(), b.rows.begin(), b.rows.end());
    std::vector<std::uint32_t> cols = a.cols;
    cols.insert(cols.end(), b.cols.begin(), b.cols.end());
    rows = sorted_unique(std::move(rows));
    cols = sorted_unique(std::move(cols));
    return {realign(a, rows, cols), realign(b, rows, cols)};
}

PctMatrix transpose(const PctMatrix& m)
{
    PctMatrix out(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            out.at(c, r) = m.at(r, c);
        }
    }
    return out;
}

PctMatrix matrix_difference(const PctMatrix& a_pct, const PctMatrix& b_pct)
{
    if (a_pct.rows != b_pct.rows || a_pct.cols != b_pct.cols) {
        throw Error(Errc::ValidationError, "matrix_difference: label sets differ; realign first");
    }
    PctMatrix out(a_pct.rows, a_pct.cols);
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
        out.cells[i] = b_pct.cells[i] - a_pct.cells[i];
    }
    return out;
}

ZScoreFilter zscore_row_filter(const PctMatrix& diff, double threshold)
{
    ZScoreFilter out;
    out.z.assign(diff.cells.size(), 0.0);
    if (diff.cells.empty()) {
        return out;
    }
    const double n = static_cast<double>(diff.cells.size());
    out.mean = std::accumulate(diff.cells.begin(), diff.cells.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : diff.cells) {
        ss += (v - out.mean) * (v - out.mean);
    }
    out.stddev = std::sqrt(ss / n);
    if (out.stddev == 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < diff.cells.size(); ++i) {
        out.z[i] = (diff.cells[i] - out.mean) / out.stddev;
    }
    for (std::size_t r = 0; r < diff.rows.size(); ++r) {
        for (std::size_t c = 0; c < diff.cols.size(); ++c) {
            if (out.z[r * diff.cols.size() + c] > threshold) {
                out.kept_rows.push_back(r);
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Destination analytics

namespace {

double row_mass(const PctMatrix& m, std::size_t r)
{
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
        s += m.at(r, c);
    }
    return s;
}

/// Weighted mean of attr(destination) per origin, weights = row cells.
template <class Attr>
OriginValues weighted_destination_mean(const PctMatrix& od, Attr attr)
{
    OriginValues out;
    for (std::size_t r = 0; r < od.rows.size(); ++r) {
        double mass = 0.0;
        double acc = 0.0;
        for (std::size_t c = 0; c < od.cols.size(); ++c) {
            const double w = od.at(r, c);
            if (w != 0.0) {
                mass += w;
                acc += w * attr(od.cols[c]);
            }
        }
        if (mass > 0.0) {
            out.values.emplace(od.rows[r], acc / mass);
        } else {
            out.skipped.push_back(od.rows[r]);
        }
    }
    return out;
}

}  // namespace

OriginValues destination_divergence(const PctMatrix& od_year_pct, const PctMatrix& od_base_pct,
                                    const ComunaTable& comunas)
{
    auto [year, base] = align_union(od_year_pct, od_base_pct);
    OriginValues out;
    for (std::size_t r = 0; r < year.rows.size(); ++r) {
        const std::uint32_t origin = year.rows[r];
        const bool in_year = od_year_pct.row_of(origin).has_value();
        const bool in_base = od_base_pct.row_of(origin).has_value();
        const double my = row_mass(year, r);
        const double mb = row_mass(base, r);
        if (!in_year || !in_base || my <= 0.0 || mb <= 0.0) {
            out.skipped.push_back(origin);
            continue;
        }
        std::vector<std::uint32_t> support;
        std::vector<double> p;
        std::vector<double> q;
        for (std::size_t c = 0; c < year.cols.size(); ++c) {
            if (year.at(r, c) > 0.0 || base.at(r, c) > 0.0) {
                support.push_back(year.cols[c]);
                p.push_back(year.at(r, c) / my);
                q.push_back(base.at(r, c) / mb);
            }
        }
        const std::size_t n = support.size();
        std::vector<double> ground(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const ComunaProfile& a = comunas.at(support[i]);
            for (std::size_t j = i + 1; j < n; ++j) {
                const ComunaProfile& b = comunas.at(support[j]);
                const double d = haversine_km(a.centroid_lat, a.centroid_lon, b.centroid_lat, b.centroid_lon);
                ground[i * n + j] = d;
                ground[j * n + i] = d;
            }
        }
        out.values.emplace(origin, wasserstein1(p, q, ground));
    }
    return out;
}

OriginValues average_destination_rurality(const PctMatrix& od, const ComunaTable& comunas)
{
    return weighted_destination_mean(od, [&](std::uint32_t dest) { return comunas.at(dest).rurality_pct; });
}

OriginValues rurality_shift(const PctMatrix& od_t_pct, const PctMatrix& od_t0_pct, const ComunaTable& comunas)
{
    const OriginValues rt = average_destination_rurality(od_t_pct, comunas);
    const OriginValues r0 = average_destination_rurality(od_t0_pct, comunas);
    OriginValues out;
    std::set<std::uint32_t> origins(od_t_pct.rows.begin(), od_t_pct.rows.end());
    origins.insert(od_t0_pct.rows.begin(), od_t0_pct.rows.end());
    for (std::uint32_t origin : origins) {
        auto a = rt.values.find(origin);
        auto b = r0.values.find(origin);
        if (a == rt.values.end() || b == r0.values.end()) {
            out.skipped.push_back(origin);
        } else {
            out.values.emplace(origin, a->second - b->second);
        }
    }
    return out;
}

OriginValues density_weighted_destination(const PctMatrix& od_pct, const ComunaTable& comunas)
{
    return weighted_destination_mean(od_pct, [&](std::uint32_t dest) { return comunas.at(dest).density(); });
}

OriginValues icvu_tradeoff(const PctMatrix& od_pct, const ComunaTable& comunas)
{
    OriginValues out;
    for (std::size_t r = 0; r < od_pct.rows.size(); ++r) {
        const ComunaProfile& origin = comunas.at(od_pct.rows[r]);
        if (!origin.icvu) {
            out.skipped.push_back(origin.comuna_id);
            continue;
        }
        double mass = 0.0;
        double acc = 0.0;
        for (std::size_t c = 0; c < od_pct.cols.size(); ++c) {
            const double w = od_pct.at(r, c);
            if (w == 0.0) {
                continue;
            }
            const ComunaProfile& dest = comunas.at(od_pct.cols[c]);
            if (!dest.icvu) {
                continue;
            }
            mass += w;
            acc += w * (*dest.icvu - *origin.icvu);
        }
        if (mass > 0.0) {
            out.values.emplace(origin.comuna_id, acc / mass);
        } else {
            out.skipped.push_back(origin.comuna_id);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regions, gravity, hosting

std::vector<RegionProfile> aggregate_regions(const ComunaTable& comunas)
{
    struct Acc {
        double pop = 0.0;
        double lat = 0.0;
        double lon = 0.0;
    };
    std::map<RegionId, Acc> acc;
    for (const auto& p : comunas.all()) {
        auto& a = acc[p.region_id];
        a.pop += p.population;
        a.lat += p.population * p.centroid_lat;
        a.lon += p.population * p.centroid_lon;
    }
    std::vector<RegionProfile> out;
    for (const auto& [id, a] : acc) {
        out.push_back({id, a.pop, {a.lat / a.pop, a.lon / a.pop}});
    }
    return out;
}

GeoPoint scl_centroid(const ComunaTable& comunas)
{
    double pop = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    for (const auto& p : comunas.all()) {
        if (p.in_scl) {
            pop += p.population;
            lat += p.population * p.centroid_lat;
            lon += p.population * p.centroid_lon;
        }
    }
    if (pop <= 0.0) {
        throw Error(Errc::ValidationError, "comuna table has no capital comunas");
    }
    return {lat / pop, lon / pop};
}

std::vector<RegionFlow> gravity_rank(std::span<const RegionProfile> regions, GeoPoint scl, const OdMatrix* od_region)
{
    if (od_region != nullptr &&
        (od_region->direction != FlowDirection::Emigration || od_region->destination_level != Level::Region)) {
        throw Error(Errc::ValidationError, "gravity_rank expects an emigration matrix at region level");
    }
    std::vector<RegionFlow> out;
    for (const auto& region : regions) {
        if (region.region_id == kMetropolitanRegion) {
            continue;
        }
        RegionFlow f;
        f.region_id = region.region_id;
        f.population = region.population;
        f.distance_km = haversine_km(region.centroid.lat, region.centroid.lon, scl.lat, scl.lon);
        if (!(f.distance_km > 0.0)) {
            throw Error(Errc::DegenerateGeometry,
                        "region " + std::to_string(region.region_id) + " centroid coincides with the capital");
        }
        f.gravity_score = f.population / f.distance_km;
        if (od_region != nullptr) {
            if (auto c = od_region->counts.col_of(region.region_id)) {
                for (std::size_t r = 0; r < od_region->counts.rows.size(); ++r) {
                    f.inflow_from_scl += od_region->counts.at(r, *c);
                }
            }
        }
        out.push_back(f);
    }
    std::sort(out.begin(), out.end(), [](const RegionFlow& a, const RegionFlow& b) {
        if (a.gravity_score != b.gravity_score) {
            return a.gravity_score > b.gravity_score;
        }
        return a.region_id < b.region_id;
    });
    return out;
}

std::map<ComunaId, double> expansion_factors(std::span<const MigrationRecord> records, const ComunaTable& comunas)
{
    std::map<ComunaId, std::uint64_t> base;
    for (const auto& r : records) {
        ++base[r.origin_comuna];
    }
    std::map<ComunaId, double> out;
    for (const auto& [id, n] : base) {
        out.emplace(id, comunas.at(id).population / static_cast<double>(n));
    }
    return out;
}

std::vector<HostingImpact> hosting_impact(const OdMatrix& od_region, std::span<const RegionProfile> regions,
                                          const ComunaTable& comunas)
{
    if (od_region.direction != FlowDirection::Emigration || od_region.destination_level != Level::Region) {
        throw Error(Errc::ValidationError, "hosting_impact expects an emigration matrix at region level");
    }
    std::vector<HostingImpact> out;
    for (const auto& region : regions) {
        if (region.region_id == kMetropolitanRegion) {
            continue;
        }
        if (!(region.population > 0.0)) {
            throw Error(Errc::ValidationError, "region " + std::to_string(region.region_id) + " has no population");
        }
        HostingImpact h;
        h.region_id = region.region_id;
        h.population = region.population;
        if (auto c = od_region.counts.col_of(region.region_id)) {
            for (std::size_t r = 0; r < od_region.counts.rows.size(); ++r) {
                const std::uint64_t n = od_region.counts.at(r, *c);
                if (n == 0) {
                    continue;
                }
                const double factor =
                    comunas.at(od_region.counts.rows[r]).population / static_cast<double>(od_region.origin_base[r]);
                h.inflow_devices += n;
                h.inflow_persons += static_cast<double>(n) * factor;
            }
        }
        h.pct = 100.0 * h.inflow_persons / h.population;
        out.push_back(h);
    }
    return out;
}

std::map<RegionId, double> hosting_difference(std::span<const HostingImpact> year, std::span<const HostingImpact> base)
{
    std::map<RegionId, double> base_pct;
    for (const auto& h : base) {
        base_pct.emplace(h.region_id, h.pct);
    }
    std::map<RegionId, double> out;
    for (const auto& h : year) {
        if (auto it = base_pct.find(h.region_id); it != base_pct.end()) {
            out.emplace(h.region_id, h.pct - it->second);
        }
    }
    return out;
}

std::vector<NetMigration> net_migration_table(std::span<const MigrationRecord> records, const ComunaTable& comunas)
{
    const auto factors = expansion_factors(records, comunas);
    std::map<ComunaId, NetMigration> rows;
    for (const auto& p : comunas.all()) {
        if (p.in_scl) {
            NetMigration n;
            n.comuna_id = p.comuna_id;
            n.population = p.population;
            rows.emplace(p.comuna_id, n);
        }
    }
    for (const auto& r : records) {
        const ComunaProfile& origin = comunas.at(r.origin_comuna);
        const ComunaProfile& dest = comunas.at(r.destination_comuna);
        const double w = factors.at(r.origin_comuna);
        if (origin.in_scl && r.migrated) {
            auto& row = rows.at(origin.comuna_id);
            ++row.emigrant_devices;
            row.emigrants += w;
        }
        if (origin.region_id != kMetropolitanRegion && dest.in_scl) {
            auto& row = rows.at(dest.comuna_id);
            ++row.immigrant_devices;
            row.immigrants += w;
        }
    }
    std::vector<NetMigration> out;
    out.reserve(rows.size());
    for (auto& [id, row] : rows) {
        row.rate = net_migration_rate(row.immigrants, row.emigrants, row.population);
        out.push_back(row);
    }
    return out;
}

MigrationTotals capital_totals(std::span<const NetMigration> table)
{
    MigrationTotals t;
    for (const auto& row : table) {
        t.immigrants += row.immigrants;
        t.emigrants += row.emigrants;
        t.population += row.population;
    }
    t.net_flow = t.immigrants - t.emigrants;
    t.rate = t.population > 0.0 ? net_migration_rate(t.immigrants, t.emigrants, t.population) : 0.0;
    return t;
}

// ---------------------------------------------------------------------------
// Census validation

std::string_view to_string(CensusLevel level) noexcept
{
    switch (level) {
    case CensusLevel::RegionsScl: return "regions_scl";
    case CensusLevel::ComunasScl: return "comunas_scl";
    case CensusLevel::CountrySclComunas: return "country_scl_comunas";
    case CensusLevel::ComunasSclComunas: return "comunas_scl_comunas";
    }
    return "unknown";
}

CensusLevel parse_census_level(std::string_view text)
{
    for (CensusLevel l : {CensusLevel::RegionsScl, CensusLevel::ComunasScl, CensusLevel::CountrySclComunas,
                          CensusLevel::ComunasSclComunas}) {
        if (text == to_string(l)) {
            return l;
        }
    }
    throw Error(Errc::ValidationError, "unknown census level '" + std::string(text) + "'");
}

DirectionalFlows model_flows(std::span<const MigrationRecord> records, const ComunaTable& comunas, CensusLevel level)
{
    const auto factors = expansion_factors(records, comunas);
    DirectionalFlows flows;
    const std::string scl = "SCL";
    const std::string country = "COUNTRY";
    for (const auto& r : records) {
        const ComunaProfile& origin = comunas.at(r.origin_comuna);
        const ComunaProfile& dest = comunas.at(r.destination_comuna);
        const double w = factors.at(r.origin_comuna);
        if (origin.region_id != kMetropolitanRegion && dest.in_scl) {
            FlowKey key;
            switch (level) {
            case CensusLevel::RegionsScl: key = {std::to_string(origin.region_id), scl}; break;
            case CensusLevel::ComunasScl: key = {std::to_string(origin.comuna_id), scl}; break;
            case CensusLevel::CountrySclComunas: key = {country, std::to_string(dest.comuna_id)}; break;
            case CensusLevel::ComunasSclComunas:
                key = {std::to_string(origin.comuna_id), std::to_string(dest.comuna_id)};
                break;
            }
            flows.immigration[key] += w;
        }
        if (origin.in_scl && r.migrated) {
            FlowKey key;
            switch (level) {
            case CensusLevel::RegionsScl: key = {scl, std::to_string(dest.region_id)}; break;
            case CensusLevel::ComunasScl: key = {scl, std::to_string(dest.comuna_id)}; break;
            case CensusLevel::CountrySclComunas: key = {std::to_string(origin.comuna_id), country}; break;
            case CensusLevel::ComunasSclComunas:
                key = {std::to_string(origin.comuna_id), std::to_string(dest.comuna_id)};
                break;
            }
            flows.emigration[key] += w;
        }
    }
    return flows;
}

namespace {

CensusCorrelation correlate(const std::map<FlowKey, double>& model, const std::map<FlowKey, double>& census,
                            std::string_view what)
{
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [key, flow] : census) {
        auto it = model.find(key);
        x.push_back(it == model.end() ? 0.0 : it->second);
        y.push_back(flow);
    }
    if (x.size() < 3) {
        throw Error(Errc::InsufficientData, std::string(what) + ": fewer than 3 aligned flow pairs");
    }
    const stats::Correlation c = stats::pearson(x, y);
    return {c.n, c.r, c.df(), c.p_value};
}

}  // namespace

CensusReport census_validation(const DirectionalFlows& model, const DirectionalFlows& census, CensusLevel level)
{
    CensusReport report;
    report.level = level;
    report.immigration = correlate(model.immigration, census.immigration, "immigration");
    report.emigration = correlate(model.emigration, census.emigration, "emigration");
    return report;
}

std::map<CensusLevel, DirectionalFlows> load_census(const std::filesystem::path& path)
{
    csv::TableReader reader(path);
    reader.expect_header(kCensusCsvHeader);
    std::map<CensusLevel, DirectionalFlows> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 5) {
            reader.fail(Errc::SchemaError, "expected 5 fields");
        }
        CensusLevel level{};
        try {
            level = parse_census_level(f[0]);
        } catch (const Error& e) {
            reader.fail(e.code(), e.what());
        }
        auto flow = csv::parse_number<double>(f[4]);
        if (!flow || *flow < 0.0) {
            reader.fail(Errc::ValidationError, "bad flow '" + f[4] + "'");
        }
        auto& flows = out[level];
        if (f[1] == "immigration") {
            flows.immigration[{f[2], f[3]}] += *flow;
        } else if (f[1] == "emigration") {
            flows.emigration[{f[2], f[3]}] += *flow;
        } else {
            reader.fail(Errc::ValidationError, "bad direction '" + f[1] + "'");
        }
    }
    return out;
}

}  // namespace xdrmob
