#include <gtest/gtest.h>

#include <gsl/gsl_cdf.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support/oracles.hpp"

using namespace muontag;

namespace {

Pulse make_pulse(DetectorId ch, std::uint64_t record, double t0_s, double peak_us, double amp)
{
    Pulse p;
    p.channel = ch;
    p.record_id = record;
    p.t0_s = t0_s;
    p.peak_time_us = peak_us;
    p.amplitude = amp;
    p.baseline_rms = 1.0;
    return p;
}

//! Flat background plus a Gaussian delay peak filled from a fixed seed.
DelayHistogram synthetic_peak(double sigma_us, double mean_us, std::size_t n_peak, std::size_t n_flat,
                              std::uint64_t seed)
{
    DelayHistogram h;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(mean_us, sigma_us);
    std::uniform_real_distribution<double> u(h.lo(), h.hi());
    for (std::size_t i = 0; i < n_peak; ++i) h.add(g(rng));
    for (std::size_t i = 0; i < n_flat; ++i) h.add(u(rng));
    return h;
}

SimulationSummary muon_only_summary()
{
    SimulationSummary s;
    s.livetime_s = 3600.0;
    s.muon.generated = 1000000;
    s.muon.singles = {1250, 900, 1240};
    s.muon.top_bottom = 990;
    s.muon.center = 900;
    s.muon.center_tagged = 820;
    s.events = 2400;
    return s;
}

SimulationSummary mixed_summary()
{
    SimulationSummary s = muon_only_summary();
    s.gamma.generated = 50000000;
    s.gamma.singles = {11100, 2300, 9500};
    s.gamma.top_bottom = 60;
    s.events = 25000;
    return s;
}

}  // namespace

TEST(BuildDelayHistogram, SimultaneousPulsesLandAtZero)
{
    std::vector<Pulse> pulses;
    for (std::uint64_t r = 0; r < 50; ++r)
    {
        pulses.push_back(make_pulse(DetectorId::Top, r, 0.1 * r, 6000.0, 40.0));
        pulses.push_back(make_pulse(DetectorId::Bottom, r, 0.1 * r, 6000.0, 40.0));
    }
    auto h = build_delay_histogram(pulses);
    EXPECT_EQ(h.entries(), 50u);
    std::size_t zero_bin = static_cast<std::size_t>((0.0 - h.lo()) / h.bin_width());
    EXPECT_EQ(h.count(zero_bin), 50u);
    for (double d : h.delays()) EXPECT_EQ(d, 0.0);
}

TEST(BuildDelayHistogram, SignIsBottomMinusTop)
{
    std::vector<Pulse> pulses{make_pulse(DetectorId::Top, 0, 0.0, 6000.0, 20.0),
                              make_pulse(DetectorId::Bottom, 0, 0.0, 6300.0, 20.0)};
    auto h = build_delay_histogram(pulses);
    ASSERT_EQ(h.entries(), 1u);
    EXPECT_DOUBLE_EQ(h.delays()[0], 300.0);
}

TEST(BuildDelayHistogram, PairsLargestPulsePerChannel)
{
    std::vector<Pulse> pulses{make_pulse(DetectorId::Top, 0, 0.0, 1000.0, 8.0),
                              make_pulse(DetectorId::Top, 0, 0.0, 6000.0, 40.0),
                              make_pulse(DetectorId::Bottom, 0, 0.0, 6050.0, 35.0),
                              make_pulse(DetectorId::Bottom, 0, 0.0, 9000.0, 7.0),
                              make_pulse(DetectorId::Center, 0, 0.0, 6000.0, 90.0)};
    auto h = build_delay_histogram(pulses);
    ASSERT_EQ(h.entries(), 1u);
    EXPECT_DOUBLE_EQ(h.delays()[0], 50.0);
}

TEST(BuildDelayHistogram, RecordsWithoutBothChannelsSkipped)
{
    std::vector<Pulse> pulses{make_pulse(DetectorId::Top, 0, 0.0, 6000.0, 20.0),
                              make_pulse(DetectorId::Bottom, 1, 1.0, 6000.0, 20.0),
                              make_pulse(DetectorId::Center, 2, 2.0, 6000.0, 20.0)};
    EXPECT_EQ(build_delay_histogram(pulses).entries(), 0u);
}

TEST(BuildDelayHistogram, OverlappingRecordsCountPhysicalPairOnce)
{
    // the same T-B pair seen in two records triggered 300 µs apart
    std::vector<Pulse> pulses{make_pulse(DetectorId::Top, 0, 10.0, 6000.0, 30.0),
                              make_pulse(DetectorId::Bottom, 0, 10.0, 6300.0, 30.0),
                              make_pulse(DetectorId::Top, 1, 10.0003, 5700.0, 30.0),
                              make_pulse(DetectorId::Bottom, 1, 10.0003, 6000.0, 30.0)};
    auto timed = assign_physical_ids(pulses, 150.0);
    auto counts = unique_pulse_counts(timed);
    EXPECT_EQ(counts[index_of(DetectorId::Top)], 1u);
    EXPECT_EQ(counts[index_of(DetectorId::Bottom)], 1u);
    EXPECT_EQ(counts[index_of(DetectorId::Center)], 0u);
    auto h = build_delay_histogram(timed);
    ASSERT_EQ(h.entries(), 1u);
    EXPECT_NEAR(h.delays()[0], 300.0, 1e-9);
}

TEST(AssignPhysicalIds, DistinctPulsesInOneRecordKeepDistinctIds)
{
    std::vector<Pulse> pulses{make_pulse(DetectorId::Top, 0, 0.0, 6000.0, 30.0),
                              make_pulse(DetectorId::Top, 0, 0.0, 6100.0, 30.0)};
    auto timed = assign_physical_ids(pulses, 150.0);
    EXPECT_NE(timed[0].physical_id, timed[1].physical_id);
    EXPECT_EQ(unique_pulse_counts(timed)[0], 2u);
}

TEST(BuildDelayHistogram, IndependentStreamsAreFlat)
{
    oracle::ToyConfig cfg;
    cfg.rate_coincident = 0.0;
    cfg.livetime_s = 4 * 3600.0;
    auto run = oracle::run_toy(cfg, 4242);
    auto h = build_delay_histogram(assign_physical_ids(run.pulses, 150.0), 500.0, -5000.0, 5000.0);
    double n = 0;
    for (auto c : h.counts()) n += static_cast<double>(c);
    double expect = n / static_cast<double>(h.n_bins());
    ASSERT_GT(expect, 30.0);
    double chi2 = 0;
    for (auto c : h.counts()) chi2 += (c - expect) * (c - expect) / expect;
    double p = gsl_cdf_chisq_Q(chi2, static_cast<double>(h.n_bins() - 1));
    EXPECT_GT(p, 0.01) << "chi2 " << chi2;
}

TEST(DelayHistogram, MergeIsAssociative)
{
    auto a = synthetic_peak(56.7, 0.0, 100, 50, 1);
    auto b = synthetic_peak(56.7, 0.0, 80, 60, 2);
    auto c = synthetic_peak(56.7, 0.0, 40, 70, 3);
    DelayHistogram left = a;
    left.merge(b);
    left.merge(c);
    DelayHistogram bc = b;
    bc.merge(c);
    DelayHistogram right = a;
    right.merge(bc);
    EXPECT_EQ(left.counts(), right.counts());
    EXPECT_EQ(left.entries(), right.entries());
    EXPECT_EQ(left.overflow(), right.overflow());
}

TEST(DelayHistogram, MergeRejectsBinningMismatch)
{
    DelayHistogram a;
    DelayHistogram b(-6000.0, 18000.0, 10.0);
    EXPECT_THROW(a.merge(b), InvalidArgument);
}

TEST(DelayHistogram, CountBetweenIsHalfOpenOverRawDelays)
{
    DelayHistogram h;
    for (double d : {-400.0, -401.0, -2500.0, 0.0, 17999.0, 20000.0}) h.add(d);
    EXPECT_EQ(h.count_between(-2500.0, -400.0), 2u);
    EXPECT_EQ(h.overflow(), 1u);
    EXPECT_EQ(h.entries(), 6u);
}

TEST(FitCoincidenceWindow, NominalWidthPeakGivesHalfWidth170)
{
    auto h = synthetic_peak(56.7, 0.0, 3000, 20000, 7);
    auto fit = fit_coincidence_window(h);
    EXPECT_NEAR(fit.window.half_width_us, 170.0, 17.0);
    EXPECT_NEAR(fit.window.half_width_us, 3.0 * fit.sigma_us, 1e-9);
    EXPECT_GE(fit.significance, 5.0);
}

TEST(FitCoincidenceWindow, SymmetricPeakCentredWithinOneBin)
{
    DelayHistogram h;
    // exactly symmetric fill about zero
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 56.7);
    std::uniform_real_distribution<double> u(0.0, 6000.0);
    for (int i = 0; i < 2000; ++i)
    {
        double d = g(rng);
        h.add(d);
        h.add(-d);
    }
    for (int i = 0; i < 4000; ++i)
    {
        double d = u(rng);
        h.add(d);
        h.add(-d);
    }
    auto fit = fit_coincidence_window(h);
    EXPECT_LT(std::abs(fit.window.center_us), h.bin_width());
}

TEST(FitCoincidenceWindow, FlatHistogramHasInsufficientSignificance)
{
    auto h = synthetic_peak(56.7, 0.0, 0, 20000, 11);
    EXPECT_THROW(fit_coincidence_window(h), FitError);
}

TEST(FitCoincidenceWindow, NominalMixtureShowsPeakOverFlatSidebands)
{
    auto run = oracle::run_toy(oracle::ToyConfig{}, 31);
    auto h = build_delay_histogram(assign_physical_ids(run.pulses, 150.0));
    auto fit = fit_coincidence_window(h);
    EXPECT_GE(fit.significance, 5.0);
    EXPECT_NEAR(fit.sigma_us, 56.7, 0.15 * 56.7);
    // per-µs density in the window well above either sideband
    double in_window = static_cast<double>(h.count_between(-170.0, 170.0)) / 340.0;
    double neg = static_cast<double>(h.count_between(-2500.0, -400.0)) / 2100.0;
    double pos = static_cast<double>(h.count_between(400.0, 2500.0)) / 2100.0;
    EXPECT_GT(in_window, 10.0 * neg);
    EXPECT_GT(in_window, 10.0 * pos);
}

TEST(AnalyticAccidentals, GammaGammaExample)
{
    EXPECT_NEAR(analytic_accidentals(2.9, 3.0, 340e-6), 2.958e-3, 1e-12);
}

TEST(AnalyticAccidentals, MeasuredSinglesExample)
{
    EXPECT_NEAR(analytic_accidentals(3.43, 2.97, 340e-6), 3.463614e-3, 1e-9);
}

TEST(AnalyticAccidentals, ZeroRateGivesZero)
{
    EXPECT_EQ(analytic_accidentals(0.0, 3.0, 340e-6), 0.0);
    EXPECT_EQ(analytic_accidentals(3.0, 0.0, 340e-6), 0.0);
}

TEST(AnalyticAccidentals, DoublesExactlyWithWindow)
{
    for (double w : {1e-6, 170e-6, 340e-6, 0.01})
        EXPECT_EQ(analytic_accidentals(3.43, 2.97, 2.0 * w), 2.0 * analytic_accidentals(3.43, 2.97, w));
}

TEST(AnalyticAccidentals, MixedTermFromTwoCalls)
{
    double tg = 2.9, bg = 3.0, tm = 0.35, bm = 0.34, w = 340e-6;
    double mixed = analytic_accidentals(tg, bm, w) + analytic_accidentals(tm, bg, w);
    EXPECT_NEAR(mixed, (tg * bm + tm * bg) * w, 1e-15);
}

TEST(AnalyticAccidentals, NegativeInputRejected)
{
    EXPECT_THROW(analytic_accidentals(-1.0, 1.0, 1e-3), InvalidArgument);
}

TEST(SidebandAccidentals, ScalesCountsToWindow)
{
    DelayHistogram h;
    for (int i = 0; i < 40; ++i) h.add(-2400.0 + 50.0 * i);
    auto m = sideband_accidentals(h, -2500.0, -400.0, 340.0, 3600.0);
    double scale = 340.0 / 2100.0 / 3600.0;
    EXPECT_NEAR(m.value, 40 * scale, 1e-15);
    EXPECT_NEAR(m.error, std::sqrt(40.0) * scale, 1e-15);
}

TEST(SidebandAccidentals, ZeroCountsGiveUpperLimitError)
{
    DelayHistogram h;
    h.add(0.0);
    auto m = sideband_accidentals(h, -2500.0, -400.0, 340.0, 3600.0);
    EXPECT_EQ(m.value, 0.0);
    EXPECT_GT(m.error, 0.0);
}

TEST(SidebandAccidentals, InvalidRangesRejected)
{
    DelayHistogram h;
    EXPECT_THROW(sideband_accidentals(h, -400.0, -400.0, 340.0, 3600.0), InvalidArgument);
    EXPECT_THROW(sideband_accidentals(h, -400.0, -2500.0, 340.0, 3600.0), InvalidArgument);
    EXPECT_THROW(sideband_accidentals(h, -2500.0, -400.0, 340.0, 0.0), InvalidArgument);
    EXPECT_THROW(sideband_accidentals(h, -9000.0, -400.0, 340.0, 3600.0), InvalidArgument);
}

TEST(SidebandAccidentals, AgreesWithAnalyticOnIndependentStreams)
{
    oracle::ToyConfig cfg;
    cfg.rate_coincident = 0.0;
    auto run = oracle::run_toy(cfg, 77);
    auto timed = assign_physical_ids(run.pulses, 150.0);
    auto u = unique_pulse_counts(timed);
    double rt = u[0] / cfg.livetime_s, rb = u[2] / cfg.livetime_s;
    double an = analytic_accidentals(rt, rb, 340e-6);
    double an_err = 340e-6 * std::hypot(std::sqrt(u[0]) / cfg.livetime_s * rb, std::sqrt(u[2]) / cfg.livetime_s * rt);
    auto sb = sideband_accidentals(build_delay_histogram(timed), -2500.0, -400.0, 340.0, cfg.livetime_s);
    EXPECT_LT(std::abs(sb.value - an), 2.0 * std::hypot(sb.error, an_err))
        << "sideband " << sb.value << " analytic " << an;
}

TEST(SidebandAccidentals, PositiveSidebandBiasedHighOnAsymmetricRecords)
{
    // pooled over seeds of the nominal-rate emulation with 25 % pre-trigger records
    double neg = 0, pos = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        auto run = oracle::run_toy(oracle::ToyConfig{}, 500 + seed);
        auto h = build_delay_histogram(assign_physical_ids(run.pulses, 150.0));
        neg += static_cast<double>(h.count_between(-2500.0, -400.0));
        pos += static_cast<double>(h.count_between(400.0, 2500.0));
    }
    RecordProperty("negative_sideband", std::to_string(neg));
    RecordProperty("positive_sideband", std::to_string(pos));
    EXPECT_GT(pos - neg, 2.0 * std::sqrt(pos + neg)) << "negative " << neg << " positive " << pos;
}

TEST(ExtractMuonRate, ReferenceSubtraction)
{
    auto r = extract_muon_rate({211e-3, 8e-3}, {18.6e-3, 4.0e-3}, {0.0, 0.0});
    EXPECT_NEAR(r.rate.value, 192.4e-3, 1e-12);
    EXPECT_NEAR(r.rate.error, 8.944e-3, 1e-6);
    EXPECT_FALSE(r.negative);
}

TEST(ExtractMuonRate, ZeroSubtrahendIsIdentity)
{
    Measurement tb{0.25, 0.01};
    auto r = extract_muon_rate(tb, {0.0, 0.0}, {0.0, 0.0});
    EXPECT_EQ(r.rate, tb);
}

TEST(ExtractMuonRate, NegativeResultFlagged)
{
    auto r = extract_muon_rate({1e-3, 1e-3}, {2e-3, 1e-3}, {1e-3, 0.0});
    EXPECT_TRUE(r.negative);
    EXPECT_LT(r.rate.value, 0.0);
}

TEST(ExtractMuonRate, QuadratureErrorMatchesBootstrap)
{
    Measurement tb{211e-3, 8e-3}, gg{18.6e-3, 4.0e-3}, acc{3.5e-3, 0.4e-3};
    auto r = extract_muon_rate(tb, gg, acc);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 10000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i)
    {
        double v = (tb.value + tb.error * z(rng)) - (gg.value + gg.error * z(rng)) - (acc.value + acc.error * z(rng));
        s += v;
        s2 += v * v;
    }
    double mean = s / n;
    double sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(r.rate.error, sd, 0.05 * sd);
}

TEST(DeadTimeFraction, ReferenceExamples)
{
    EXPECT_NEAR(dead_time_fraction(15e-3, 3.6e-3, 1e-3), 1.86e-5, 1e-12);
    EXPECT_NEAR(dead_time_fraction(15e-3, 3.6e-3, 5e-3), 9.3e-5, 1e-12);
    EXPECT_NEAR(dead_time_fraction(15e-3, 3.6e-3, 25e-3), 4.65e-4, 1e-12);
    EXPECT_EQ(dead_time_fraction(15e-3, 3.6e-3, 0.0), 0.0);
    EXPECT_THROW(dead_time_fraction(-1.0, 0.0, 1e-3), InvalidArgument);
}

TEST(TaggingEfficiency, ReferenceRatio)
{
    auto e = tagging_efficiency(4589, 5073);
    EXPECT_NEAR(e.value, 0.9046, 5e-5);
    EXPECT_NEAR(e.error, 0.0041, 5e-5);
}

TEST(TaggingEfficiency, Extremes)
{
    EXPECT_EQ(tagging_efficiency(37, 37).value, 1.0);
    EXPECT_EQ(tagging_efficiency(0, 37).value, 0.0);
    EXPECT_THROW(tagging_efficiency(0, 0), InvalidArgument);
    EXPECT_THROW(tagging_efficiency(5, 4), InvalidArgument);
}

TEST(SimulationReport, MuonOnlyHasZeroGammaRows)
{
    auto rep = assemble_simulation_report(muon_only_summary(), AnalysisConfig{});
    for (const char* k : {"R_T_gamma", "R_B_gamma", "R_C_gamma", "R_TB_gg", "R_acc_gg", "R_acc_gmu", "R_acc"})
        EXPECT_EQ(rep.row(k).value, 0.0) << k;
    EXPECT_EQ(rep.row("R_TB_mumu").value, rep.row("R_TB").value);
    EXPECT_NEAR(rep.row("epsilon").value, 820.0 / 900.0, 1e-12);
    for (const auto& [k, v] : rep.rows) EXPECT_EQ(v.source, RateSource::Simulated) << k;
}

TEST(SimulationReport, InvariantHoldsForMixture)
{
    auto rep = assemble_simulation_report(mixed_summary(), AnalysisConfig{});
    double lhs = rep.row("R_TB_mumu").value;
    double rhs = rep.row("R_TB").value - rep.row("R_TB_gg").value - rep.row("R_acc_used").value;
    EXPECT_NEAR(lhs, rhs, 1e-15);
    double w = 340e-6;
    double t_g = 11100 / 3600.0, b_g = 9500 / 3600.0, t_m = 1250 / 3600.0, b_m = 1240 / 3600.0;
    EXPECT_NEAR(rep.row("R_acc_gg").value, t_g * b_g * w, 1e-15);
    EXPECT_NEAR(rep.row("R_acc_gmu").value, (t_g * b_m + t_m * b_g) * w, 1e-15);
    EXPECT_NEAR(rep.row(veto_key(25e-3)).value, (rep.row("R_TB_gg").value + rep.row("R_acc").value) * 25e-3, 1e-15);
    // 5 % systematic added in quadrature
    double stat = std::sqrt(60.0 * (1 - 60.0 / 50e6)) / 3600.0;
    EXPECT_NEAR(rep.row("R_TB_gg").error, std::hypot(stat, 0.05 * 60.0 / 3600.0), 1e-15);
}

TEST(RateReportJson, RoundTripIsLossless)
{
    auto rep = assemble_simulation_report(mixed_summary(), AnalysisConfig{});
    rep.flags.push_back("test_flag");
    auto back = report_from_json(nlohmann::json::parse(to_json(rep).dump()));
    EXPECT_EQ(back, rep);
}

TEST(RateReportJson, MalformedInputRejected)
{
    EXPECT_THROW(report_from_json(nlohmann::json::object()), FormatError);
    auto j = to_json(assemble_simulation_report(mixed_summary(), AnalysisConfig{}));
    j["schema_version"] = kReportSchemaVersion + 1;
    EXPECT_THROW(report_from_json(j), FormatError);
}

TEST(MeasuredReport, LivetimeMismatchRejected)
{
    auto run = oracle::run_toy(oracle::ToyConfig{}, 5);
    auto a = analyze_pulses(run.pulses, 3600.0, AnalysisConfig{});
    auto s = mixed_summary();
    s.livetime_s = 3000.0;
    EXPECT_THROW(assemble_measured_report(s, a, AnalysisConfig{}), InvalidArgument);
}

TEST(MeasuredReport, InvariantAndSourcesForEachAccidentalChoice)
{
    auto run = oracle::run_toy(oracle::ToyConfig{}, 6);
    AnalysisConfig cfg;
    auto a = analyze_pulses(run.pulses, 3600.0, cfg);
    for (auto src : {AccidentalSource::Simulation, AccidentalSource::MeasuredAnalytic, AccidentalSource::Sideband})
    {
        cfg.accidental_source = src;
        auto rep = assemble_measured_report(mixed_summary(), a, cfg);
        double lhs = rep.row("R_TB_mumu").value;
        double rhs = rep.row("R_TB").value - rep.row("R_TB_gg").value - rep.row("R_acc_used").value;
        EXPECT_NEAR(lhs, rhs, 1e-15);
        EXPECT_EQ(rep.row("R_TB").source, RateSource::Measured);
        EXPECT_EQ(rep.row("R_TB_gg").source, RateSource::Simulated);
        EXPECT_EQ(rep.row("R_TB_mumu").source, RateSource::Measured);
        EXPECT_EQ(report_from_json(to_json(rep)), rep);
    }
}

TEST(AnalyzePulses, CountsMatchToyTruth)
{
    auto run = oracle::run_toy(oracle::ToyConfig{}, 8);
    auto a = analyze_pulses(run.pulses, 3600.0, AnalysisConfig{});
    // every injected pulse is above threshold and counted once
    EXPECT_NEAR(a.singles[0].value, 3.43, 5 * std::sqrt(3.43 / 3600.0) + 0.01);
    EXPECT_NEAR(a.singles[2].value, 2.97, 5 * std::sqrt(2.97 / 3600.0) + 0.01);
    EXPECT_EQ(a.singles[1].value, 0.0);
    EXPECT_EQ(a.histogram.entries(), std::accumulate(a.histogram.counts().begin(), a.histogram.counts().end(),
                                                     std::uint64_t{0}) + a.histogram.overflow());
    double tb = a.r_tb.value;
    EXPECT_NEAR(tb, 0.195 + 3.46e-3, 5 * std::sqrt(0.2 / 3600.0));
}
