// Record reconstruction driver, coincidence analysis and RateReport assembly.
#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coincidence.hpp"
#include "core.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "pulse.hpp"
#include "transport.hpp"

namespace muontag {

enum class WindowMode
{
    Fixed,
    Fit,
};

enum class AccidentalSource
{
    Simulation,
    MeasuredAnalytic,
    Sideband,
};

struct AnalysisConfig
{
    double select_threshold_sigma = 5.0;
    double bin_width_us = 20.0;
    double histogram_lo_us = -6000.0;
    double histogram_hi_us = 18000.0;
    double fit_range_us = 2500.0;
    double window_sigmas = 3.0;
    double min_significance = 5.0;
    WindowMode window_mode = WindowMode::Fixed;
    double window_half_width_us = 170.0;
    double sideband_lo_us = -2500.0;
    double sideband_hi_us = -400.0;
    double dedup_tolerance_us = 150.0;
    std::vector<double> veto_s{1e-3, 5e-3, 25e-3};
    AccidentalSource accidental_source = AccidentalSource::Simulation;
    double simulation_systematic = 0.05;
    std::size_t min_noise_records = 20;
    std::size_t psd_max_records = 2000;
    double psd_veto_sigma = 5.5;
    MatchedFilterConfig filter;

    void validate() const
    {
        if (!(select_threshold_sigma > 0)) throw ConfigError("select_threshold_sigma must be positive");
        if (!(bin_width_us > 0 && histogram_hi_us > histogram_lo_us)) throw ConfigError("invalid histogram binning");
        if (!(window_half_width_us > 0)) throw ConfigError("window half width must be positive");
        if (!(sideband_hi_us > sideband_lo_us)) throw ConfigError("empty sideband range");
        if (sideband_lo_us < histogram_lo_us || sideband_hi_us > histogram_hi_us)
            throw ConfigError("sideband must lie inside the histogram range");
        if (!(fit_range_us > 0 && window_sigmas > 0)) throw ConfigError("invalid window fit settings");
        for (double v : veto_s)
            if (!(v >= 0)) throw ConfigError("veto times must be non-negative");
        if (!(simulation_systematic >= 0)) throw ConfigError("simulation_systematic must be non-negative");
        if (min_noise_records < 1) throw ConfigError("min_noise_records must be >= 1");
        if (psd_max_records < min_noise_records) throw ConfigError("psd_max_records must be >= min_noise_records");
    }
};

inline std::string veto_key(double veto_s)
{
    return detail::format("f_DT_%gms", veto_s * 1e3);
}

struct ReconstructionOutput
{
    std::vector<Pulse> pulses;
    std::array<NoisePSD, kNumDetectors> psd;
    RecordFileHeader header;
    std::uint64_t records = 0;
};

/*!
 * Matched-filter reconstruction of every record in a file.
 *
 * The noise PSD of each channel comes from the pulse-free traces among the
 * first `psd_max_records` records. Records are filtered in batches across
 * workers; pulse order follows record order.
 */
inline ReconstructionOutput reconstruct_file(const std::string& path,
                                             const std::array<PulseTemplate, kNumDetectors>& templates,
                                             const AnalysisConfig& cfg, unsigned workers = 1)
{
    cfg.validate();
    ReconstructionOutput out;
    std::vector<WaveformRecord> head;
    {
        RecordReader reader(path);
        out.header = reader.header();
        head = reader.read_batch(cfg.psd_max_records);
    }
    std::array<std::unique_ptr<MatchedFilter>, kNumDetectors> filters;
    std::array<const MatchedFilter*, kNumDetectors> fptr{};
    for (int c = 0; c < kNumDetectors; ++c)
    {
        out.psd[c] = estimate_noise_psd(head, static_cast<DetectorId>(c), out.header.sampling_rate_hz,
                                        cfg.min_noise_records, cfg.psd_veto_sigma);
        filters[c] = std::make_unique<MatchedFilter>(templates[c], out.psd[c], cfg.filter);
        fptr[c] = filters[c].get();
    }
    head.clear();

    RecordReader reader(path);
    constexpr std::size_t kBatch = 512;
    while (true)
    {
        auto batch = reader.read_batch(kBatch);
        if (batch.empty()) break;
        std::vector<std::vector<Pulse>> per(batch.size());
        parallel_for(batch.size(), workers, [&](std::size_t i) { per[i] = reconstruct_record(batch[i], fptr); });
        for (auto& p : per) out.pulses.insert(out.pulses.end(), p.begin(), p.end());
        out.records += batch.size();
    }
    return out;
}

struct PulseAnalysis
{
    double livetime_s = 0.0;
    std::uint64_t n_pulses = 0;
    std::uint64_t n_selected = 0;
    std::array<std::uint64_t, kNumDetectors> unique_pulses{};
    std::array<Measurement, kNumDetectors> singles{};
    DelayHistogram histogram;
    std::optional<WindowFit> fit;
    std::string fit_error;
    CoincidenceWindow window;
    std::uint64_t coincidences = 0;
    Measurement r_tb;
    std::uint64_t sideband_counts = 0;
    Measurement r_acc_sideband;
};

//! Selection, de-duplication, delay histogram, window, coincidence and sideband rates.
inline PulseAnalysis analyze_pulses(const std::vector<Pulse>& pulses, double livetime_s, const AnalysisConfig& cfg)
{
    cfg.validate();
    if (!(livetime_s > 0)) throw InvalidArgument("analysis livetime must be positive");
    PulseAnalysis a;
    a.livetime_s = livetime_s;
    a.n_pulses = pulses.size();
    auto selected = select_pulses(pulses, cfg.select_threshold_sigma);
    a.n_selected = selected.size();
    auto timed = assign_physical_ids(selected, cfg.dedup_tolerance_us);
    a.unique_pulses = unique_pulse_counts(timed);
    for (int c = 0; c < kNumDetectors; ++c)
    {
        double n = static_cast<double>(a.unique_pulses[c]);
        a.singles[c] = {n / livetime_s, std::sqrt(n) / livetime_s};
    }
    a.histogram = build_delay_histogram(timed, cfg.bin_width_us, cfg.histogram_lo_us, cfg.histogram_hi_us);
    try
    {
        a.fit = fit_coincidence_window(a.histogram, cfg.fit_range_us, cfg.window_sigmas, cfg.min_significance);
    }
    catch (const FitError& e)
    {
        a.fit_error = e.what();
        if (cfg.window_mode == WindowMode::Fit) throw;
    }
    a.window = cfg.window_mode == WindowMode::Fit ? a.fit->window
                                                 : CoincidenceWindow{0.0, cfg.window_half_width_us};
    // closed window: both edges included
    a.coincidences = 0;
    for (double d : a.histogram.delays())
        if (d >= a.window.lo_us() && d <= a.window.hi_us()) ++a.coincidences;
    double n = static_cast<double>(a.coincidences);
    a.r_tb = {n / livetime_s, std::sqrt(n) / livetime_s};
    a.sideband_counts = a.histogram.count_between(cfg.sideband_lo_us, cfg.sideband_hi_us);
    a.r_acc_sideband = sideband_accidentals(a.histogram, cfg.sideband_lo_us, cfg.sideband_hi_us,
                                            a.window.total_width_us(), livetime_s);
    return a;
}

enum class RateSource
{
    Simulated,
    Measured,
};

inline std::string_view to_string(RateSource s)
{
    return s == RateSource::Simulated ? "SIMULATED" : "MEASURED";
}

struct ReportRow
{
    double value = 0.0;
    double error = 0.0;
    RateSource source = RateSource::Simulated;

    Measurement measurement() const { return {value, error}; }
    bool operator==(const ReportRow&) const = default;
};

inline constexpr int kReportSchemaVersion = 1;

/*!
 * Rates, accidentals, efficiency and dead time of one run, each row tagged
 * SIMULATED or MEASURED.
 */
struct RateReport
{
    int schema_version = kReportSchemaVersion;
    std::string kind;  //!< "simulated" or "measured"
    double livetime_s = 0.0;
    bool complete = true;
    std::map<std::string, ReportRow> rows;
    std::map<std::string, double> window;
    std::map<std::string, std::uint64_t> counts;
    std::vector<std::string> flags;

    bool operator==(const RateReport&) const = default;

    const ReportRow& row(const std::string& key) const
    {
        auto it = rows.find(key);
        if (it == rows.end()) throw InvalidArgument("report has no row '" + key + "'");
        return it->second;
    }
};

inline nlohmann::json to_json(const RateReport& r)
{
    nlohmann::json j;
    j["schema"] = "muontag-rate-report";
    j["schema_version"] = r.schema_version;
    j["kind"] = r.kind;
    j["livetime_s"] = r.livetime_s;
    j["complete"] = r.complete;
    nlohmann::json rows = nlohmann::json::object();
    for (const auto& [k, v] : r.rows)
        rows[k] = {{"value", v.value}, {"error", v.error}, {"source", std::string(to_string(v.source))}};
    j["rows"] = rows;
    j["window"] = r.window;
    j["counts"] = r.counts;
    j["flags"] = r.flags;
    return j;
}

inline RateReport report_from_json(const nlohmann::json& j)
{
    try
    {
        if (j.at("schema").get<std::string>() != "muontag-rate-report") throw FormatError("not a rate report");
        RateReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion)
            throw FormatError("incompatible report schema version " + std::to_string(r.schema_version));
        r.kind = j.at("kind").get<std::string>();
        r.livetime_s = j.at("livetime_s").get<double>();
        r.complete = j.at("complete").get<bool>();
        for (const auto& [k, v] : j.at("rows").items())
        {
            ReportRow row;
            row.value = v.at("value").get<double>();
            row.error = v.at("error").get<double>();
            auto src = v.at("source").get<std::string>();
            if (src == "SIMULATED")
                row.source = RateSource::Simulated;
            else if (src == "MEASURED")
                row.source = RateSource::Measured;
            else
                throw FormatError("unknown row source '" + src + "'");
            r.rows[k] = row;
        }
        r.window = j.at("window").get<std::map<std::string, double>>();
        r.counts = j.at("counts").get<std::map<std::string, std::uint64_t>>();
        r.flags = j.at("flags").get<std::vector<std::string>>();
        return r;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("malformed rate report: ") + e.what());
    }
}

namespace detail {
//! Add a relative systematic in quadrature.
inline ReportRow simulated_row(Measurement m, double systematic)
{
    return {m.value, std::hypot(m.error, systematic * m.value), RateSource::Simulated};
}

inline void check_report_invariants(const RateReport& r)
{
    for (const auto& [k, v] : r.rows)
    {
        if (k == "R_TB_mumu") continue;  // extracted; negative values are flagged instead
        if (v.value < 0) throw Error("report row " + k + " is negative");
    }
    if (r.rows.count("epsilon"))
    {
        double e = r.rows.at("epsilon").value;
        if (e < 0 || e > 1) throw Error("tagging efficiency outside [0, 1]");
    }
    double lhs = r.row("R_TB_mumu").value;
    double rhs = r.row("R_TB").value - r.row("R_TB_gg").value - r.row("R_acc_used").value;
    if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(r.row("R_TB").value)))
        throw Error("R_TB_mumu does not equal R_TB - R_TB_gg - R_acc");
}

struct SimulatedRates
{
    ReportRow t, b, c, t_mu, b_mu, c_mu, t_g, b_g, c_g, tb_mumu, tb_gg, tb_true, acc_gg, acc_gmu, acc, tb_total;
    std::optional<ReportRow> epsilon;
    std::uint64_t tagged = 0, center = 0;
};

inline SimulatedRates simulated_rates(const SimulationSummary& s, double window_s, double sys)
{
    SimulatedRates r;
    auto row = [&](Measurement m) { return simulated_row(m, sys); };
    r.t = row(s.single_rate(DetectorId::Top));
    r.b = row(s.single_rate(DetectorId::Bottom));
    r.c = row(s.single_rate(DetectorId::Center));
    r.t_mu = row(s.single_rate(Species::Muon, DetectorId::Top));
    r.b_mu = row(s.single_rate(Species::Muon, DetectorId::Bottom));
    r.c_mu = row(s.single_rate(Species::Muon, DetectorId::Center));
    r.t_g = row(s.single_rate(Species::Gamma, DetectorId::Top));
    r.b_g = row(s.single_rate(Species::Gamma, DetectorId::Bottom));
    r.c_g = row(s.single_rate(Species::Gamma, DetectorId::Center));
    r.tb_mumu = row(s.top_bottom_rate(Species::Muon));
    r.tb_gg = row(s.top_bottom_rate(Species::Gamma));
    Measurement tbt = r.tb_mumu.measurement() + r.tb_gg.measurement();
    r.tb_true = {tbt.value, tbt.error, RateSource::Simulated};

    // accidental products with first-order error propagation
    auto product = [&](const ReportRow& x, const ReportRow& y) {
        double v = analytic_accidentals(x.value, y.value, window_s);
        double e = window_s * std::hypot(x.error * y.value, y.error * x.value);
        return Measurement{v, e};
    };
    Measurement gg = product(r.t_g, r.b_g);
    Measurement gmu = product(r.t_g, r.b_mu) + product(r.t_mu, r.b_g);
    r.acc_gg = {gg.value, gg.error, RateSource::Simulated};
    r.acc_gmu = {gmu.value, gmu.error, RateSource::Simulated};
    Measurement acc = gg + gmu;
    r.acc = {acc.value, acc.error, RateSource::Simulated};
    Measurement tot = tbt + acc;
    r.tb_total = {tot.value, tot.error, RateSource::Simulated};
    r.center = s.muon.center;
    r.tagged = s.muon.center_tagged;
    if (s.muon.center > 0)
    {
        Measurement e = tagging_efficiency(s.muon.center_tagged, s.muon.center);
        r.epsilon = ReportRow{e.value, e.error, RateSource::Simulated};
    }
    return r;
}
}  // namespace detail

/*!
 * Report of the simulation arm. R_TB is the expected total T–B rate
 * (true µµ + γγ coincidences plus analytic accidentals); R_TB_true omits the
 * accidentals.
 */
inline RateReport assemble_simulation_report(const SimulationSummary& s, const AnalysisConfig& cfg)
{
    cfg.validate();
    double window_s = 2.0 * cfg.window_half_width_us * 1e-6;
    auto r = detail::simulated_rates(s, window_s, cfg.simulation_systematic);
    RateReport rep;
    rep.kind = "simulated";
    rep.livetime_s = s.livetime_s;
    rep.complete = s.complete;
    rep.rows = {{"R_T", r.t},         {"R_B", r.b},           {"R_C", r.c},         {"R_T_mu", r.t_mu},
                {"R_B_mu", r.b_mu},   {"R_C_mu", r.c_mu},     {"R_T_gamma", r.t_g}, {"R_B_gamma", r.b_g},
                {"R_C_gamma", r.c_g}, {"R_TB_mumu", r.tb_mumu}, {"R_TB_gg", r.tb_gg}, {"R_TB_true", r.tb_true},
                {"R_acc_gg", r.acc_gg}, {"R_acc_gmu", r.acc_gmu}, {"R_acc", r.acc}, {"R_acc_used", r.acc},
                {"R_TB", r.tb_total}};
    if (r.epsilon) rep.rows["epsilon"] = *r.epsilon;
    for (double v : cfg.veto_s)
    {
        double f = dead_time_fraction(r.tb_gg.value, r.acc.value, v);
        double e = v * std::hypot(r.tb_gg.error, r.acc.error);
        rep.rows[veto_key(v)] = {f, e, RateSource::Simulated};
    }
    rep.window = {{"center_us", 0.0}, {"half_width_us", cfg.window_half_width_us}};
    rep.counts = {{"muon_generated", s.muon.generated},  {"gamma_generated", s.gamma.generated},
                  {"muon_center", s.muon.center},        {"muon_tagged", s.muon.center_tagged},
                  {"muon_top_bottom", s.muon.top_bottom}, {"gamma_top_bottom", s.gamma.top_bottom},
                  {"events", s.events}};
    if (!s.complete) rep.flags.push_back("simulation_incomplete");
    detail::check_report_invariants(rep);
    return rep;
}

/*!
 * Report of the synthetic-DAQ arm with the simulation expectations alongside.
 *
 * R_TB_mumu = R_TB - R_TB_gg - R_acc_used, with R_TB_gg (and by default
 * R_acc_used) taken from the simulation arm with its systematic.
 */
inline RateReport assemble_measured_report(const SimulationSummary& s, const PulseAnalysis& a,
                                           const AnalysisConfig& cfg, double tolerance_s = 0.0)
{
    cfg.validate();
    double tol = std::max(tolerance_s, 1e-9 * std::max(1.0, s.livetime_s));
    if (std::abs(s.livetime_s - a.livetime_s) > tol)
        throw InvalidArgument(detail::format("livetime mismatch: simulation %.9g s vs analysis %.9g s",
                                             s.livetime_s, a.livetime_s));
    double window_s = a.window.total_width_us() * 1e-6;
    auto sim = detail::simulated_rates(s, window_s, cfg.simulation_systematic);

    RateReport rep;
    rep.kind = "measured";
    rep.livetime_s = a.livetime_s;
    rep.complete = s.complete;
    auto measured = [](Measurement m) { return ReportRow{m.value, m.error, RateSource::Measured}; };
    rep.rows["R_T"] = measured(a.singles[0]);
    rep.rows["R_C"] = measured(a.singles[1]);
    rep.rows["R_B"] = measured(a.singles[2]);
    rep.rows["R_TB"] = measured(a.r_tb);
    rep.rows["R_acc_SB"] = measured(a.r_acc_sideband);
    Measurement t = a.singles[0], b = a.singles[2];
    double acc_an = analytic_accidentals(t.value, b.value, window_s);
    rep.rows["R_acc_analytic"] = measured({acc_an, window_s * std::hypot(t.error * b.value, b.error * t.value)});
    rep.rows["R_TB_gg"] = sim.tb_gg;
    rep.rows["R_acc"] = sim.acc;

    ReportRow used;
    switch (cfg.accidental_source)
    {
        case AccidentalSource::Simulation: used = sim.acc; break;
        case AccidentalSource::MeasuredAnalytic: used = rep.rows["R_acc_analytic"]; break;
        case AccidentalSource::Sideband: used = rep.rows["R_acc_SB"]; break;
    }
    rep.rows["R_acc_used"] = used;
    auto ex = extract_muon_rate(a.r_tb, sim.tb_gg.measurement(), used.measurement());
    rep.rows["R_TB_mumu"] = measured(ex.rate);
    if (ex.negative) rep.flags.push_back("R_TB_mumu_negative");

    rep.rows["R_T_expected"] = sim.t;
    rep.rows["R_B_expected"] = sim.b;
    rep.rows["R_C_expected"] = sim.c;
    rep.rows["R_TB_expected"] = sim.tb_total;
    rep.rows["R_TB_expected_true"] = sim.tb_true;
    rep.rows["R_TB_mumu_expected"] = sim.tb_mumu;
    if (sim.epsilon) rep.rows["epsilon"] = *sim.epsilon;
    for (double v : cfg.veto_s)
    {
        double f = dead_time_fraction(sim.tb_gg.value, used.value, v);
        double e = v * std::hypot(sim.tb_gg.error, used.error);
        rep.rows[veto_key(v)] = {f, e, used.source};
    }

    rep.window = {{"center_us", a.window.center_us}, {"half_width_us", a.window.half_width_us}};
    if (a.fit)
    {
        rep.window["fit_mean_us"] = a.fit->mean_us;
        rep.window["fit_sigma_us"] = a.fit->sigma_us;
        rep.window["fit_sigma_error_us"] = a.fit->sigma_error_us;
        rep.window["fit_half_width_us"] = a.fit->window.half_width_us;
        rep.window["fit_significance"] = a.fit->significance;
        rep.window["fit_chi2_ndf"] = a.fit->chi2_ndf;
    }
    else
    {
        rep.flags.push_back("window_fit_failed");
    }
    rep.counts = {{"pulses", a.n_pulses},
                  {"selected_pulses", a.n_selected},
                  {"unique_TOP", a.unique_pulses[0]},
                  {"unique_CENTER", a.unique_pulses[1]},
                  {"unique_BOTTOM", a.unique_pulses[2]},
                  {"histogram_entries", a.histogram.entries()},
                  {"coincidences", a.coincidences},
                  {"sideband_counts", a.sideband_counts},
                  {"muon_top_bottom_truth", s.muon.top_bottom}};
    if (!s.complete) rep.flags.push_back("simulation_incomplete");
    detail::check_report_invariants(rep);
    return rep;
}

//! Layout of the simulated-rates table: rows TOP, BOTTOM, T-B; columns by species.
inline void write_table1_csv(std::ostream& out, const RateReport& sim)
{
    auto cell = [&](const std::string& k) {
        const auto& r = sim.row(k);
        return detail::format("%.6g,%.6g", r.value, r.error);
    };
    out << "row,muon_rate,muon_error,gamma_rate,gamma_error,total_rate,total_error\n";
    out << "TOP," << cell("R_T_mu") << ',' << cell("R_T_gamma") << ',' << cell("R_T") << '\n';
    out << "BOTTOM," << cell("R_B_mu") << ',' << cell("R_B_gamma") << ',' << cell("R_B") << '\n';
    out << "T-B," << cell("R_TB_mumu") << ',' << cell("R_TB_gg") << ',' << cell("R_TB_true") << '\n';
    out << "T-B incl. accidentals,,,," << ",," << cell("R_TB") << '\n';
}

//! Layout of the measured-vs-expected table.
inline void write_table2_csv(std::ostream& out, const RateReport& meas)
{
    auto cell = [&](const std::string& k) {
        const auto& r = meas.row(k);
        return detail::format("%.6g,%.6g", r.value, r.error);
    };
    out << "row,measured_rate,measured_error,expected_rate,expected_error\n";
    out << "TOP," << cell("R_T") << ',' << cell("R_T_expected") << '\n';
    out << "BOTTOM," << cell("R_B") << ',' << cell("R_B_expected") << '\n';
    out << "T-B," << cell("R_TB") << ',' << cell("R_TB_expected") << '\n';
    out << "T-B muon (extracted)," << cell("R_TB_mumu") << ',' << cell("R_TB_mumu_expected") << '\n';
}

struct Pull
{
    std::string key;
    ReportRow a;
    ReportRow b;
    double pull = 0.0;
};

//! Pulls (a - b)/sqrt(σa² + σb²) over rows present in both reports.
inline std::vector<Pull> compare_reports(const RateReport& a, const RateReport& b)
{
    if (a.schema_version != b.schema_version) throw FormatError("incompatible report schema versions");
    std::vector<Pull> out;
    for (const auto& [k, ra] : a.rows)
    {
        auto it = b.rows.find(k);
        if (it == b.rows.end()) continue;
        const auto& rb = it->second;
        double s = std::hypot(ra.error, rb.error);
        out.push_back({k, ra, rb, s > 0 ? (ra.value - rb.value) / s : 0.0});
    }
    return out;
}

}  // namespace muontag
