// Command-line front end for the xdrmob pipeline.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "xdrmob/pipeline.hpp"

namespace {

using xdrmob::cli::RunOptions;

struct FlagValues {
    int window_year = 0;
    int tz_offset = 0;
    unsigned min_night_events = 0;
    int baseline_week = 0;
    unsigned threads = 0;
    std::string format;
    std::uint64_t seed = 0;
    double max_drop_fraction = 0.0;
    std::string config;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw xdrmob::Error(xdrmob::Errc::IoError, "cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Migration and daily-mobility analytics over cellular event streams"};
    app.require_subcommand(1);
    app.fallthrough();

    FlagValues f;
    auto* o_year = app.add_option("--window-year", f.window_year, "study year (window Mar 1 - Nov 30)");
    auto* o_tz = app.add_option("--tz-offset", f.tz_offset, "local time offset from UTC in hours");
    auto* o_min = app.add_option("--min-night-events", f.min_night_events, "night events needed per device-week");
    auto* o_base = app.add_option("--baseline-week", f.baseline_week, "ordinal of the March week used as baseline");
    auto* o_threads = app.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    auto* o_format = app.add_option("--format", f.format, "XDR encoding for written streams")
                         ->check(CLI::IsMember({"csv", "bin", "binary"}));
    auto* o_seed = app.add_option("--seed", f.seed, "scenario seed (synth)");
    auto* o_drop =
        app.add_option("--max-drop-fraction", f.max_drop_fraction, "fail when more XDR rows than this are dropped")
            ->check(CLI::Range(0.0, 1.0));
    app.add_option("--config", f.config, "JSON file with option values; flags win");

    xdrmob::cli::SynthArgs synth_args;
    std::string synth_config;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scenario with ground truth");
    synth->add_option("--scenario", synth_config, "scenario JSON");
    synth->add_option("--out", synth_args.out, "output directory")->required();

    xdrmob::cli::HomesArgs homes_args;
    std::string homes_comunas;
    auto* homes = app.add_subcommand("homes", "infer weekly home comunas");
    homes->add_option("--xdr", homes_args.xdr, "device-grouped XDR stream")->required();
    homes->add_option("--antennas", homes_args.antennas, "antenna registry CSV")->required();
    homes->add_option("--comunas", homes_comunas, "comuna table, to validate antenna comunas");
    homes->add_option("--out", homes_args.out, "output directory")->required();

    xdrmob::cli::MigrateArgs migrate_args;
    auto* migrate = app.add_subcommand("migrate", "classify migrations from inferred homes");
    migrate->add_option("--homes", migrate_args.homes, "output directory of `homes`")->required();
    migrate->add_option("--comunas", migrate_args.comunas, "comuna table CSV")->required();
    migrate->add_option("--out", migrate_args.out, "output directory")->required();

    xdrmob::cli::IndicesArgs indices_args;
    auto* indices = app.add_subcommand("indices", "daily mobility indices per comuna");
    indices->add_option("--xdr", indices_args.xdr, "device-grouped XDR stream")->required();
    indices->add_option("--antennas", indices_args.antennas, "antenna registry CSV")->required();
    indices->add_option("--homes", indices_args.homes, "output directory of `homes`")->required();
    indices->add_option("--quarantines", indices_args.quarantines, "quarantine schedule CSV")->required();
    indices->add_option("--out", indices_args.out, "output directory")->required();

    xdrmob::cli::AnalyzeArgs analyze_args;
    std::string census;
    std::string indices_dir;
    auto* analyze = app.add_subcommand("analyze", "socioeconomic and geographic analyses");
    analyze->add_option("--migration", analyze_args.migrations, "output directory of `migrate` (repeatable)")
        ->required();
    analyze->add_option("--comunas", analyze_args.comunas, "comuna table CSV")->required();
    analyze->add_option("--census", census, "census flow table CSV");
    analyze->add_option("--indices", indices_dir, "output directory of `indices`");
    analyze->add_option("--out", analyze_args.out, "output directory")->required();

    xdrmob::cli::ReportArgs report_args;
    auto* report = app.add_subcommand("report", "render summary.json as markdown");
    report->add_option("--analysis", report_args.analysis, "output directory of `analyze`")->required();
    report->add_option("--out", report_args.out, "output directory")->required();

    xdrmob::cli::ConvertArgs convert_args;
    bool group = false;
    auto* convert = app.add_subcommand("convert", "re-encode an XDR stream");
    convert->add_option("--in", convert_args.in, "input XDR stream")->required();
    convert->add_option("--antennas", convert_args.antennas, "antenna registry CSV")->required();
    convert->add_option("--out", convert_args.out, "output file")->required();
    convert->add_flag("--group", group, "reorder events by device then time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunOptions opts;
        if (!f.config.empty()) {
            opts = xdrmob::cli::options_from_json(read_file(f.config), opts);
        }
        if (o_year->count() > 0) {
            opts.window_year = f.window_year;
        }
        if (o_tz->count() > 0) {
            opts.tz_offset = f.tz_offset;
        }
        if (o_min->count() > 0) {
            opts.min_night_events = f.min_night_events;
        }
        if (o_base->count() > 0) {
            opts.baseline_week = f.baseline_week;
        }
        if (o_threads->count() > 0) {
            opts.threads = f.threads;
        }
        if (o_format->count() > 0) {
            opts.format = xdrmob::parse_format(f.format);
        }
        if (o_seed->count() > 0) {
            opts.seed = f.seed;
        }
        if (o_drop->count() > 0) {
            opts.max_drop_fraction = f.max_drop_fraction;
        }
        if (group) {
            opts.group = true;
        }

        if (*synth) {
            if (!synth_config.empty()) {
                synth_args.config = synth_config;
            }
            xdrmob::cli::cmd_synth(synth_args, opts);
        } else if (*homes) {
            if (!homes_comunas.empty()) {
                homes_args.comunas = homes_comunas;
            }
            xdrmob::cli::cmd_homes(homes_args, opts);
        } else if (*migrate) {
            xdrmob::cli::cmd_migrate(migrate_args, opts);
        } else if (*indices) {
            xdrmob::cli::cmd_indices(indices_args, opts);
        } else if (*analyze) {
            if (!census.empty()) {
                analyze_args.census = census;
            }
            if (!indices_dir.empty()) {
                analyze_args.indices = indices_dir;
            }
            xdrmob::cli::cmd_analyze(analyze_args, opts);
        } else if (*report) {
            xdrmob::cli::cmd_report(report_args, opts);
        } else if (*convert) {
            const auto stats = xdrmob::cli::cmd_convert(convert_args, opts);
            std::cerr << "read " << stats.events_read << ", kept " << stats.events_kept << ", dropped "
                      << stats.dropped() << " (malformed " << stats.events_dropped_malformed << ", unknown antenna "
                      << stats.events_dropped_unknown_antenna << ", out of window "
                      << stats.events_dropped_out_of_window << ")\n";
        }
    } catch (const xdrmob::Error& e) {
        std::cerr << "xdrmob: " << e.what() << '\n';
        return xdrmob::cli::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "xdrmob: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
