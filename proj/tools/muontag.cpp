// Command-line front end: muontag simulate | daq | analyze | report.
#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <muontag/muontag.hpp>

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) { g_cancel.store(true); }

struct GlobalOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> n_primaries;
    std::optional<double> livetime_s;
};

muontag::RunConfig resolve_config(const GlobalOptions& g)
{
    muontag::RunConfig cfg = g.config_path.empty() ? muontag::RunConfig{} : muontag::load_config(g.config_path);
    if (g.seed) cfg.run.seed = *g.seed;
    if (g.workers) cfg.run.workers = *g.workers;
    if (g.out_dir) cfg.run.out_dir = *g.out_dir;
    if (g.n_primaries)
    {
        cfg.run.n_primaries = *g.n_primaries;
        cfg.run.livetime_s.reset();
    }
    if (g.livetime_s)
    {
        cfg.run.livetime_s = *g.livetime_s;
        cfg.run.n_primaries.reset();
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Muon tagging simulation, synthetic DAQ and coincidence analysis"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", muontag::kToolVersion);

    GlobalOptions g;
    bool print_config = false, print_schema = false;
    app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "64-bit master seed");
    app.add_option("--workers", g.workers, "worker threads (outputs do not depend on it)")
        ->check(CLI::Range(1u, 1024u));
    app.add_option("--out-dir", g.out_dir, "output directory");
    auto* np = app.add_option("--n-primaries", g.n_primaries, "expected number of primaries");
    auto* lt = app.add_option("--livetime-s", g.livetime_s, "simulated livetime in seconds");
    np->excludes(lt);
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
    app.add_flag("--print-schema", print_schema, "print the configuration JSON Schema and exit");

    auto* sim = app.add_subcommand("simulate", "simulate primaries and energy deposits");
    sim->fallthrough();

    std::string events_path;
    auto* daq = app.add_subcommand("daq", "synthesize waveforms and record triggered traces");
    daq->add_option("--events", events_path, "event file (default: <out-dir>/events.csv)");
    daq->fallthrough();

    std::string records_path, summary_path;
    auto* analyze = app.add_subcommand("analyze", "reconstruct pulses and measure coincidence rates");
    analyze->add_option("--records", records_path, "record file (default: <out-dir>/records.bin)");
    analyze->add_option("--summary", summary_path,
                        "simulation summary (default: summary.json beside the record file)");
    analyze->fallthrough();

    std::vector<std::string> report_files;
    std::string csv_path;
    auto* report = app.add_subcommand("report", "compare rate reports");
    report->add_option("reports", report_files, "report JSON files; later ones are compared to the first")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--csv", csv_path, "also write the comparison as CSV");
    report->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (print_schema)
        {
            std::cout << muontag::config_schema().dump(2) << '\n';
            return 0;
        }
        auto cfg = resolve_config(g);
        if (print_config)
        {
            std::cout << muontag::to_json(cfg).dump(2) << '\n';
            return 0;
        }
        const auto& out_dir = cfg.run.out_dir;
        unsigned workers = cfg.run.workers;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);

        if (*sim)
        {
            auto out = muontag::cmd_simulate(cfg, out_dir, workers, &g_cancel);
            std::cout << muontag::format_report(out.report);
            if (!out.summary.complete)
            {
                std::cerr << "interrupted: partial output written, summary marked incomplete\n";
                return 130;
            }
        }
        else if (*daq)
        {
            if (events_path.empty()) events_path = (std::filesystem::path(out_dir) / "events.csv").string();
            auto out = muontag::cmd_daq(cfg, events_path, out_dir, workers);
            std::cout << "records: " << out.summary.records << " (triggers " << out.summary.triggers
                      << ", dropped at stream edges " << out.summary.dropped << ")\n";
            std::cout << "trigger RMS TOP/CENTER/BOTTOM: " << out.summary.trigger_rms[0] << ' '
                      << out.summary.trigger_rms[1] << ' ' << out.summary.trigger_rms[2] << '\n';
        }
        else if (*analyze)
        {
            if (records_path.empty()) records_path = (std::filesystem::path(out_dir) / "records.bin").string();
            if (summary_path.empty())
                summary_path = (std::filesystem::path(records_path).parent_path() / "summary.json").string();
            auto out = muontag::cmd_analyze(cfg, records_path, summary_path, out_dir, workers);
            std::cout << muontag::format_report(out.report);
            if (!out.analysis.fit_error.empty())
                std::cerr << "window fit: " << out.analysis.fit_error << '\n';
        }
        else if (*report)
        {
            std::vector<muontag::RateReport> reports;
            for (const auto& f : report_files) reports.push_back(muontag::load_report(f));
            std::ofstream csv;
            if (!csv_path.empty())
            {
                csv.open(csv_path, std::ios::trunc);
                if (!csv) throw muontag::Error("cannot write " + csv_path);
            }
            std::cout << muontag::cmd_report(reports, csv_path.empty() ? nullptr : &csv);
        }
        else
        {
            std::cout << app.help();
        }
    }
    catch (const muontag::ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const muontag::FormatError& e)
    {
        std::cerr << "format error: " << e.what() << '\n';
        return 3;
    }
    catch (const muontag::FitError& e)
    {
        std::cerr << "fit error: " << e.what() << '\n';
        return 4;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
