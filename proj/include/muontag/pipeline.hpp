// Stage commands: simulate -> daq -> analyze, plus report comparison.
#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "io.hpp"
#include "manifest.hpp"

namespace muontag {

inline constexpr int kSummaryFormatVersion = 1;

inline nlohmann::json to_json(const SimulationSummary& s)
{
    auto counts = [](const SpeciesCounts& c) {
        return nlohmann::json{{"generated", c.generated},
                              {"singles", {{"TOP", c.singles[0]}, {"CENTER", c.singles[1]}, {"BOTTOM", c.singles[2]}}},
                              {"top_bottom", c.top_bottom},
                              {"center", c.center},
                              {"center_tagged", c.center_tagged}};
    };
    auto rate = [](Measurement m) { return nlohmann::json{{"value", m.value}, {"error", m.error}}; };
    nlohmann::json rates;
    for (auto sp : {Species::Muon, Species::Gamma})
    {
        std::string k(to_string(sp));
        for (auto id : kAllDetectors) rates[k][std::string(to_string(id))] = rate(s.single_rate(sp, id));
        rates[k]["TOP_BOTTOM"] = rate(s.top_bottom_rate(sp));
    }
    return {{"schema", "muontag-simulation-summary"},
            {"schema_version", kSummaryFormatVersion},
            {"complete", s.complete},
            {"seed", s.seed},
            {"livetime_s", s.livetime_s},
            {"muon_generation_rate", s.muon_generation_rate},
            {"gamma_generation_rate", s.gamma_generation_rate},
            {"muon_equivalent_livetime_s", s.muon_equivalent_livetime_s},
            {"gamma_equivalent_livetime_s", s.gamma_equivalent_livetime_s},
            {"muon", counts(s.muon)},
            {"gamma", counts(s.gamma)},
            {"events", s.events},
            {"rates", rates}};
}

inline SimulationSummary summary_from_json(const nlohmann::json& j)
{
    try
    {
        if (j.at("schema").get<std::string>() != "muontag-simulation-summary")
            throw FormatError("not a simulation summary");
        if (j.at("schema_version").get<int>() != kSummaryFormatVersion)
            throw FormatError("incompatible simulation summary version");
        auto counts = [](const nlohmann::json& c) {
            SpeciesCounts out;
            out.generated = c.at("generated").get<std::uint64_t>();
            out.singles = {c.at("singles").at("TOP").get<std::uint64_t>(),
                           c.at("singles").at("CENTER").get<std::uint64_t>(),
                           c.at("singles").at("BOTTOM").get<std::uint64_t>()};
            out.top_bottom = c.at("top_bottom").get<std::uint64_t>();
            out.center = c.at("center").get<std::uint64_t>();
            out.center_tagged = c.at("center_tagged").get<std::uint64_t>();
            return out;
        };
        SimulationSummary s;
        s.complete = j.at("complete").get<bool>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.livetime_s = j.at("livetime_s").get<double>();
        s.muon_generation_rate = j.at("muon_generation_rate").get<double>();
        s.gamma_generation_rate = j.at("gamma_generation_rate").get<double>();
        s.muon_equivalent_livetime_s = j.at("muon_equivalent_livetime_s").get<double>();
        s.gamma_equivalent_livetime_s = j.at("gamma_equivalent_livetime_s").get<double>();
        s.muon = counts(j.at("muon"));
        s.gamma = counts(j.at("gamma"));
        s.events = j.at("events").get<std::uint64_t>();
        return s;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("malformed simulation summary: ") + e.what());
    }
}

namespace detail {

inline nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw FormatError(path + " is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("error while writing " + path);
}

inline std::string ensure_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

inline std::string path_in(const std::string& dir, const std::string& name)
{
    return (std::filesystem::path(dir) / name).string();
}

class Stopwatch
{
  public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void record_stage(const std::string& out_dir, const RunConfig& cfg, const std::string& stage,
                         const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                         double wall_s)
{
    auto path = path_in(out_dir, "manifest.json");
    auto m = RunManifest::load_or_empty(path);
    m.config_hash = sha256_hex(output_relevant_json(cfg).dump());
    m.seed = cfg.run.seed;
    m.tool_version = kToolVersion;
    StageRecord r;
    r.inputs = digest_files(inputs, out_dir);
    r.outputs = digest_files(outputs, out_dir);
    r.wall_s = wall_s;
    m.stages[stage] = r;
    m.save(path);
}

}  // namespace detail

//! Human-readable rendering of a report.
inline std::string format_report(const RateReport& r)
{
    std::ostringstream out;
    out << "RateReport (" << r.kind << ", livetime " << detail::format("%.6g", r.livetime_s) << " s"
        << (r.complete ? "" : ", INCOMPLETE") << ")\n";
    out << std::left << std::setw(22) << "quantity" << std::right << std::setw(14) << "value" << std::setw(14)
        << "error" << "  source\n";
    for (const auto& [k, v] : r.rows)
        out << std::left << std::setw(22) << k << std::right << std::setw(14) << detail::format("%.5g", v.value)
            << std::setw(14) << detail::format("%.3g", v.error) << "  " << to_string(v.source) << '\n';
    for (const auto& [k, v] : r.window) out << "window." << k << " = " << detail::format("%.6g", v) << '\n';
    for (const auto& [k, v] : r.counts) out << "count." << k << " = " << v << '\n';
    for (const auto& f : r.flags) out << "flag: " << f << '\n';
    return out.str();
}

struct SimulateOutput
{
    std::string events_path;
    std::string summary_path;
    std::string report_path;
    std::string table_path;
    SimulationSummary summary;
    RateReport report;
};

/*!
 * Simulate primaries and transport. Writes events.csv, summary.json,
 * report_simulated.json, table_simulated.csv (and primaries.csv on request),
 * then records the stage in manifest.json.
 */
inline SimulateOutput cmd_simulate(const RunConfig& cfg, const std::string& out_dir, unsigned workers = 1,
                                   const std::atomic<bool>* cancel = nullptr)
{
    detail::Stopwatch clock;
    cfg.validate();
    detail::ensure_dir(out_dir);
    RunControl run;
    run.seed = cfg.run.seed;
    run.n_primaries = cfg.run.n_primaries;
    run.livetime_s = cfg.run.livetime_s;
    run.workers = workers;
    run.cancel = cancel;
    auto result = run_simulation(cfg.simulation, run);

    SimulateOutput out;
    out.summary = result.summary;
    out.events_path = detail::path_in(out_dir, "events.csv");
    out.summary_path = detail::path_in(out_dir, "summary.json");
    out.report_path = detail::path_in(out_dir, "report_simulated.json");
    out.table_path = detail::path_in(out_dir, "table_simulated.csv");
    std::vector<std::string> outputs{out.events_path, out.summary_path, out.report_path, out.table_path};
    {
        std::ofstream f(out.events_path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + out.events_path);
        write_events(f, result.events, {result.summary.livetime_s, result.summary.complete, result.summary.seed});
        if (!f) throw Error("error while writing " + out.events_path);
    }
    if (cfg.run.write_primaries)
    {
        auto p = detail::path_in(out_dir, "primaries.csv");
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + p);
        write_primaries(f, result.events);
        outputs.push_back(p);
    }
    detail::write_text_file(out.summary_path, to_json(result.summary).dump(2) + "\n");
    out.report = assemble_simulation_report(result.summary, cfg.analysis);
    detail::write_text_file(out.report_path, to_json(out.report).dump(2) + "\n");
    std::ostringstream table;
    write_table1_csv(table, out.report);
    detail::write_text_file(out.table_path, table.str());
    detail::record_stage(out_dir, cfg, "simulate", {}, outputs, clock.seconds());
    return out;
}

struct DaqOutput
{
    std::string records_path;
    std::string summary_path;
    DaqSummary summary;
};

//! Synthesize the waveform streams of an event file and record triggered traces to records.bin.
inline DaqOutput cmd_daq(const RunConfig& cfg, const std::string& events_path, const std::string& out_dir,
                         unsigned workers = 1)
{
    detail::Stopwatch clock;
    cfg.validate();
    std::ifstream in(events_path);
    if (!in) throw Error("cannot open event file " + events_path);
    EventFileInfo info;
    auto events = read_events(in, &info);
    detail::ensure_dir(out_dir);

    DaqOutput out;
    out.records_path = detail::path_in(out_dir, "records.bin");
    out.summary_path = detail::path_in(out_dir, "daq_summary.json");
    RecordFileHeader header;
    header.n_samples = static_cast<std::uint32_t>(cfg.daq.record_samples);
    header.pre_trigger_samples = static_cast<std::uint32_t>(cfg.daq.pre_trigger_samples);
    header.sampling_rate_hz = cfg.daq.sampling_rate_hz;
    header.livetime_s = std::floor(info.livetime_s * cfg.daq.sampling_rate_hz + 1e-9) / cfg.daq.sampling_rate_hz;
    RecordWriter writer(out.records_path, header);
    out.summary = run_daq(events, info.livetime_s, cfg.daq, cfg.run.seed, workers,
                          [&](WaveformRecord&& r) { writer.write(r); });
    writer.close();

    const auto& s = out.summary;
    nlohmann::json j = {{"schema", "muontag-daq-summary"},
                        {"schema_version", 1},
                        {"n_samples", s.n_samples},
                        {"livetime_s", s.livetime_s},
                        {"trigger_rms", {{"TOP", s.trigger_rms[0]}, {"CENTER", s.trigger_rms[1]}, {"BOTTOM", s.trigger_rms[2]}}},
                        {"triggers", s.triggers},
                        {"records", s.records},
                        {"dropped", s.dropped},
                        {"source_complete", info.complete}};
    detail::write_text_file(out.summary_path, j.dump(2) + "\n");
    detail::record_stage(out_dir, cfg, "daq", {events_path}, {out.records_path, out.summary_path}, clock.seconds());
    return out;
}

struct AnalyzeOutput
{
    std::string pulses_path;
    std::string histogram_path;
    std::string report_path;
    std::string table_path;
    std::string text_path;
    PulseAnalysis analysis;
    RateReport report;
};

/*!
 * Matched-filter reconstruction, coincidence analysis and the measured
 * report. `summary_path` is the summary.json of the simulation that fed the
 * DAQ; its γγ and accidental expectations enter the muon-rate extraction.
 */
inline AnalyzeOutput cmd_analyze(const RunConfig& cfg, const std::string& records_path,
                                 const std::string& summary_path, const std::string& out_dir, unsigned workers = 1)
{
    detail::Stopwatch clock;
    cfg.validate();
    auto summary = summary_from_json(detail::read_json_file(summary_path));
    auto rec = reconstruct_file(records_path, cfg.daq.templates, cfg.analysis, workers);
    detail::ensure_dir(out_dir);

    AnalyzeOutput out;
    out.pulses_path = detail::path_in(out_dir, "pulses.csv");
    out.histogram_path = detail::path_in(out_dir, "delay_histogram.csv");
    out.report_path = detail::path_in(out_dir, "report_measured.json");
    out.table_path = detail::path_in(out_dir, "table_measured.csv");
    out.text_path = detail::path_in(out_dir, "report_measured.txt");
    {
        std::ofstream f(out.pulses_path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + out.pulses_path);
        write_pulses(f, rec.pulses, {rec.header.livetime_s});
        if (!f) throw Error("error while writing " + out.pulses_path);
    }
    out.analysis = analyze_pulses(rec.pulses, rec.header.livetime_s, cfg.analysis);
    {
        std::ostringstream h;
        write_histogram_csv(h, out.analysis.histogram);
        detail::write_text_file(out.histogram_path, h.str());
    }
    out.report = assemble_measured_report(summary, out.analysis, cfg.analysis, 1.0 / rec.header.sampling_rate_hz);
    detail::write_text_file(out.report_path, to_json(out.report).dump(2) + "\n");
    std::ostringstream table;
    write_table2_csv(table, out.report);
    detail::write_text_file(out.table_path, table.str());
    detail::write_text_file(out.text_path, format_report(out.report));
    detail::record_stage(out_dir, cfg, "analyze", {records_path, summary_path},
                         {out.pulses_path, out.histogram_path, out.report_path, out.table_path, out.text_path},
                         clock.seconds());
    return out;
}

inline RateReport load_report(const std::string& path)
{
    return report_from_json(detail::read_json_file(path));
}

/*!
 * Side-by-side table of reports. With one report the rows are listed;
 * with more, every later report is compared row by row to the first with
 * pulls (a - b)/σ_combined.
 */
inline std::string cmd_report(const std::vector<RateReport>& reports, std::ostream* csv = nullptr)
{
    if (reports.empty()) throw InvalidArgument("report needs at least one report");
    for (const auto& r : reports)
        if (r.schema_version != reports.front().schema_version)
            throw FormatError("incompatible report schema versions");
    if (reports.size() == 1)
    {
        if (csv)
        {
            *csv << "quantity,value,error,source\n";
            for (const auto& [k, v] : reports[0].rows)
                *csv << k << ',' << detail::format("%.9g,%.9g", v.value, v.error) << ',' << to_string(v.source) << '\n';
        }
        return format_report(reports[0]);
    }
    std::ostringstream out;
    if (csv) *csv << "quantity,report_a,value_a,error_a,source_a,report_b,value_b,error_b,source_b,pull\n";
    for (std::size_t i = 1; i < reports.size(); ++i)
    {
        const auto& a = reports[0];
        const auto& b = reports[i];
        out << "Comparison: " << a.kind << " (a) vs " << b.kind << " (b)\n";
        out << std::left << std::setw(22) << "quantity" << std::right << std::setw(24) << "a" << std::setw(24) << "b"
            << std::setw(9) << "pull" << '\n';
        for (const auto& p : compare_reports(a, b))
        {
            out << std::left << std::setw(22) << p.key << std::right << std::setw(24)
                << detail::format("%.4g +- %.2g %c", p.a.value, p.a.error, to_string(p.a.source)[0]) << std::setw(24)
                << detail::format("%.4g +- %.2g %c", p.b.value, p.b.error, to_string(p.b.source)[0]) << std::setw(9)
                << detail::format("%.2f", p.pull) << '\n';
            if (csv)
                *csv << p.key << ',' << a.kind << ',' << detail::format("%.9g,%.9g", p.a.value, p.a.error) << ','
                     << to_string(p.a.source) << ',' << b.kind << ','
                     << detail::format("%.9g,%.9g", p.b.value, p.b.error) << ',' << to_string(p.b.source) << ','
                     << detail::format("%.4f", p.pull) << '\n';
        }
    }
    return out.str();
}

}  // namespace muontag
