#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/oracles.hpp"

using namespace muontag;

namespace {

DaqConfig quiet_config()
{
    DaqConfig cfg;
    cfg.noise.white_rms = 1e-9;
    cfg.onset_jitter_us = 0.0;
    return cfg;
}

SimEvent deposit_event(std::uint64_t id, double t, std::vector<std::pair<DetectorId, double>> deps)
{
    SimEvent e;
    e.event_id = id;
    e.primary.time_s = t;
    for (auto [d, kev] : deps) e.deposits.push_back({d, kev, t});
    return e;
}

// Band-passed peak per keV of a noiseless pulse, and band-passed RMS of unit white noise.
struct TriggerScale
{
    double peak_per_kev;
    double noise_gain;
};

TriggerScale trigger_scale(const DaqConfig& cfg)
{
    const auto& t = cfg.templates[0];
    BandPass pulse(cfg.trigger.bandpass_low_hz, cfg.trigger.bandpass_high_hz, cfg.sampling_rate_hz);
    BandPass impulse(cfg.trigger.bandpass_low_hz, cfg.trigger.bandpass_high_hz, cfg.sampling_rate_hz);
    double peak = 0.0, h2 = 0.0;
    for (int k = 0; k < 200000; ++k)
    {
        double tus = k * 1e6 / cfg.sampling_rate_hz;
        peak = std::max(peak, pulse.process(t.gain_per_kev * t.shape(tus)));
        double h = impulse.process(k == 0 ? 1.0 : 0.0);
        h2 += h * h;
    }
    return {peak, std::sqrt(h2)};
}

bool record_contains(const WaveformRecord& r, double t_s, double fs)
{
    double start = static_cast<double>(r.start_sample) / fs;
    return t_s >= start && t_s < start + static_cast<double>(r.n_samples()) / fs;
}

}  // namespace

TEST(PulseShape, ClosedFormValues)
{
    PulseTemplate t;
    EXPECT_EQ(pulse_shape(0.0, t), 0.0);
    EXPECT_EQ(pulse_shape(-10.0, t), 0.0);
    double tp = 50.0 * 500.0 / 450.0 * std::log(10.0);
    EXPECT_NEAR(t.peak_time_us(), tp, 1e-12);
    EXPECT_NEAR(pulse_shape(tp, t), 1.0, 1e-12);
    EXPECT_LT(pulse_shape(tp - 1.0, t), 1.0);
    EXPECT_LT(pulse_shape(tp + 1.0, t), 1.0);
    EXPECT_LT(pulse_shape(5 * 500.0, t), 0.01);
}

TEST(PulseShape, InvalidTemplateRejected)
{
    DaqConfig cfg;
    cfg.templates[1].rise_time_us = 600.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SynthesizeStream, NoiselessPeakEqualsGainTimesEnergy)
{
    DaqConfig cfg = quiet_config();
    cfg.templates[1].gain_per_kev = 2.5;
    // onset chosen so a sample lands on the analytic peak
    double tp = cfg.templates[1].peak_time_us() * 1e-6;
    double onset = 0.05 - tp;
    auto s = synthesize_stream({deposit_event(0, onset, {{DetectorId::Center, 150.0}})}, cfg, 1, 20000);
    double peak = *std::max_element(s[1].begin(), s[1].end());
    EXPECT_NEAR(peak, 2.5 * 150.0, 1e-6 * 2.5 * 150.0);
    EXPECT_LT(*std::max_element(s[0].begin(), s[0].end()), 1e-6);
}

TEST(SynthesizeStream, TwoDepositsTenMillisecondsApartResolve)
{
    DaqConfig cfg = quiet_config();
    double tp = cfg.templates[0].peak_time_us() * 1e-6;
    std::vector<SimEvent> ev{deposit_event(0, 0.02 - tp, {{DetectorId::Top, 150.0}}),
                             deposit_event(1, 0.03 - tp, {{DetectorId::Top, 150.0}})};
    auto s = synthesize_stream(ev, cfg, 1, 5000);
    double single_peak = 150.0 * cfg.templates[0].gain_per_kev;
    double p1 = *std::max_element(s[0].begin() + 1500, s[0].begin() + 2500);
    double p2 = *std::max_element(s[0].begin() + 2500, s[0].begin() + 3500);
    // tail of the first pulse at 10 ms is exp(-20) of its peak
    EXPECT_NEAR(p1, single_peak, 0.02 * single_peak);
    EXPECT_NEAR(p2, single_peak, 0.02 * single_peak);
    // a clear dip between them
    double dip = *std::min_element(s[0].begin() + 2200, s[0].begin() + 3000);
    EXPECT_LT(dip, 0.01 * single_peak);
}

TEST(SynthesizeStream, NoiseOnlyMatchesWhiteRms)
{
    DaqConfig cfg;
    auto s = synthesize_stream({}, cfg, 3, 1000000);
    for (const auto& ch : s)
    {
        double m = 0, v = 0;
        for (double x : ch) m += x;
        m /= static_cast<double>(ch.size());
        for (double x : ch) v += (x - m) * (x - m);
        double rms = std::sqrt(v / static_cast<double>(ch.size()));
        EXPECT_NEAR(rms, cfg.noise.white_rms, 0.02 * cfg.noise.white_rms);
    }
    // channels are independent
    double c01 = 0;
    for (std::size_t i = 0; i < s[0].size(); ++i) c01 += s[0][i] * s[1][i];
    c01 /= static_cast<double>(s[0].size()) * cfg.noise.white_rms * cfg.noise.white_rms;
    EXPECT_LT(std::abs(c01), 5.0 / std::sqrt(static_cast<double>(s[0].size())));
}

TEST(SynthesizeStream, PinkNoiseRaisesLowFrequencyPower)
{
    DaqConfig cfg;
    cfg.noise.low_freq_knee_hz = 100.0;
    auto s = synthesize_stream({}, cfg, 3, 200000);
    double v = 0;
    for (double x : s[0]) v += x * x;
    EXPECT_GT(std::sqrt(v / static_cast<double>(s[0].size())), cfg.noise.white_rms);
}

TEST(SynthesizeStream, RejectsUnsortedEvents)
{
    DaqConfig cfg;
    std::vector<SimEvent> ev{deposit_event(0, 0.2, {{DetectorId::Top, 10.0}}),
                             deposit_event(1, 0.1, {{DetectorId::Top, 10.0}})};
    EXPECT_THROW(synthesize_stream(ev, cfg, 1, 1000), InvalidArgument);
}

TEST(SynthesizeStream, IndependentOfWorkerCountAndBlockSize)
{
    DaqConfig cfg;
    cfg.noise.low_freq_knee_hz = 50.0;
    std::vector<SimEvent> ev{deposit_event(0, 0.01, {{DetectorId::Top, 150.0}, {DetectorId::Bottom, 140.0}}),
                             deposit_event(1, 0.7, {{DetectorId::Center, 60.0}})};
    auto a = synthesize_stream(ev, cfg, 9, 150000, 1);
    auto b = synthesize_stream(ev, cfg, 9, 150000, 3);
    EXPECT_EQ(a, b);
}

TEST(BandPassFilter, MatchesPrewarpedAnalogResponse)
{
    DaqConfig cfg;
    BandPass bp(20.0, 2000.0, cfg.sampling_rate_hz);
    double wl = std::tan(oracle::kPi * 20.0 / cfg.sampling_rate_hz);
    double wh = std::tan(oracle::kPi * 2000.0 / cfg.sampling_rate_hz);
    for (double f : {1.0, 20.0, 200.0, 2000.0, 10000.0, 40000.0})
    {
        double w = std::tan(oracle::kPi * f / cfg.sampling_rate_hz);
        std::complex<double> jw(0.0, w);
        double ref = std::abs(jw / (jw + wl) * (wh / (jw + wh)));
        EXPECT_NEAR(std::abs(bp.response(f)), ref, 1e-9);
    }
}

TEST(TriggerAndRecord, TenSigmaPulseGivesOneRecordOnItsChannel)
{
    DaqConfig cfg;
    cfg.onset_jitter_us = 0.0;
    auto scale = trigger_scale(cfg);
    double sigma_f = cfg.noise.white_rms * scale.noise_gain;
    double energy = 10.0 * sigma_f / scale.peak_per_kev;
    const double onset = 2.5;
    auto s = synthesize_stream({deposit_event(0, onset, {{DetectorId::Bottom, energy}})}, cfg, 5, 300000);
    std::array<double, kNumDetectors> rms{};
    auto records = trigger_and_record(s, cfg, &rms);
    EXPECT_NEAR(rms[2], sigma_f, 0.05 * sigma_f);
    int containing = 0;
    for (const auto& r : records)
    {
        ASSERT_EQ(r.n_samples(), cfg.record_samples);
        for (const auto& ch : r.channels) ASSERT_EQ(ch.size(), cfg.record_samples);
        if (!record_contains(r, onset, cfg.sampling_rate_hz)) continue;
        ++containing;
        EXPECT_EQ(r.trigger_channel, DetectorId::Bottom);
        double t_trig = static_cast<double>(r.start_sample + r.trigger_sample) / cfg.sampling_rate_hz;
        EXPECT_NEAR(t_trig, onset, 300e-6);
    }
    EXPECT_EQ(containing, 1);
}

TEST(TriggerAndRecord, RecordGeometryFollowsConfig)
{
    DaqConfig cfg;
    EXPECT_NEAR(static_cast<double>(cfg.record_samples) / cfg.sampling_rate_hz, 0.024, 1e-12);
    EXPECT_NEAR(static_cast<double>(cfg.pre_trigger_samples) / static_cast<double>(cfg.record_samples), 0.25,
                1e-12);
}

TEST(TriggerAndRecord, ThreeSimultaneousDepositsShareOneRecord)
{
    DaqConfig cfg;
    const double onset = 2.5;
    auto s = synthesize_stream(
        {deposit_event(0, onset, {{DetectorId::Top, 150.0}, {DetectorId::Center, 150.0}, {DetectorId::Bottom, 150.0}})},
        cfg, 6, 300000);
    auto records = trigger_and_record(s, cfg);
    int containing = 0;
    for (const auto& r : records)
    {
        if (!record_contains(r, onset, cfg.sampling_rate_hz)) continue;
        ++containing;
        for (const auto& ch : r.channels)
        {
            double peak = *std::max_element(ch.begin(), ch.end());
            EXPECT_GT(peak, 20.0 * cfg.noise.white_rms);
        }
    }
    EXPECT_EQ(containing, 1);
}

TEST(TriggerAndRecord, NoiseTriggerRateFollowsRice)
{
    DaqConfig cfg;
    double wl = std::tan(oracle::kPi * cfg.trigger.bandpass_low_hz / cfg.sampling_rate_hz);
    double wh = std::tan(oracle::kPi * cfg.trigger.bandpass_high_hz / cfg.sampling_rate_hz);
    auto psd = [&](double f) {
        double w = std::tan(oracle::kPi * f / cfg.sampling_rate_hz);
        double hp = w * w / (w * w + wl * wl);
        double lp = wh * wh / (w * w + wh * wh);
        return hp * lp;
    };
    for (double level : {3.0, 4.0})
    {
        cfg.trigger.threshold_sigma = level;
        DaqSummary summary = run_daq({}, 30.0, cfg, 11, 1, [](WaveformRecord&&) {});
        double per_channel = oracle::rice_rate(psd, 0.5 * cfg.sampling_rate_hz, level);
        // three independent channels; a trigger on any channel counts
        double expected = 3.0 * per_channel;
        double measured = static_cast<double>(summary.triggers) / summary.livetime_s;
        EXPECT_GT(measured, 0.5 * expected) << "level " << level;
        EXPECT_LT(measured, 2.0 * expected) << "level " << level;
    }
}

TEST(TriggerAndRecord, NoiselessRecordPeaksLinearOverThreeDecades)
{
    DaqConfig cfg = quiet_config();
    std::vector<SimEvent> ev;
    std::vector<double> energies{1.0, 10.0, 100.0, 1000.0, 3.0, 300.0};
    for (std::size_t i = 0; i < energies.size(); ++i)
        ev.push_back(deposit_event(i, 2.2 + 0.1 * static_cast<double>(i), {{DetectorId::Top, energies[i]}}));
    auto s = synthesize_stream(ev, cfg, 1, 300000);
    auto records = trigger_and_record(s, cfg);
    std::vector<double> ratio;
    for (std::size_t i = 0; i < energies.size(); ++i)
    {
        double onset = ev[i].primary.time_s;
        for (const auto& r : records)
        {
            if (!record_contains(r, onset, cfg.sampling_rate_hz)) continue;
            double peak = *std::max_element(r.channels[0].begin(), r.channels[0].end());
            ratio.push_back(peak / energies[i]);
            break;
        }
    }
    ASSERT_EQ(ratio.size(), energies.size());
    // identical sub-sample phase for every onset (multiples of 0.1 s)
    for (double q : ratio) EXPECT_NEAR(q / ratio[0], 1.0, 1e-6);
}

TEST(TriggerAndRecord, EightSigmaTriggerEfficiency)
{
    DaqConfig cfg;
    auto scale = trigger_scale(cfg);
    double energy = 8.0 * cfg.noise.white_rms * scale.noise_gain / scale.peak_per_kev;
    const int n = 10000;
    const double spacing = 0.03;
    std::vector<SimEvent> ev;
    for (int i = 0; i < n; ++i)
        ev.push_back(deposit_event(static_cast<std::uint64_t>(i), 2.1 + spacing * i,
                                   {{static_cast<DetectorId>(i % 3), energy}}));
    std::vector<std::int64_t> trig;
    double livetime = 2.1 + spacing * n + 0.1;
    run_daq(ev, livetime, cfg, 13, 1,
            [&](WaveformRecord&& r) { trig.push_back(r.start_sample + r.trigger_sample); });
    std::sort(trig.begin(), trig.end());
    int found = 0;
    for (const auto& e : ev)
    {
        auto k = static_cast<std::int64_t>(e.primary.time_s * cfg.sampling_rate_hz);
        auto it = std::lower_bound(trig.begin(), trig.end(), k - 50);
        if (it != trig.end() && *it <= k + 100) ++found;
    }
    EXPECT_GE(static_cast<double>(found) / n, 0.999) << found << " of " << n;
}

TEST(TriggerAndRecord, IsolatedDepositsInExactlyOneRecord)
{
    DaqConfig cfg;
    auto scale = trigger_scale(cfg);
    double sigma_energy = cfg.noise.white_rms * scale.noise_gain / scale.peak_per_kev;
    std::vector<SimEvent> ev;
    for (int i = 0; i < 300; ++i)
        ev.push_back(deposit_event(static_cast<std::uint64_t>(i), 2.1 + 0.1 * i,
                                   {{static_cast<DetectorId>(i % 3), (10.0 + 0.1 * i) * sigma_energy}}));
    struct Span
    {
        double start, stop, trigger;
    };
    std::vector<Span> spans;
    run_daq(ev, 32.5, cfg, 17, 1, [&](WaveformRecord&& r) {
        double start = static_cast<double>(r.start_sample) / cfg.sampling_rate_hz;
        spans.push_back({start, start + static_cast<double>(r.n_samples()) / cfg.sampling_rate_hz,
                         static_cast<double>(r.start_sample + r.trigger_sample) / cfg.sampling_rate_hz});
    });
    // a record is the deposit's own when its trigger lies on the pulse rise;
    // other records covering it come from unrelated noise triggers
    int noise_overlaps = 0;
    for (const auto& e : ev)
    {
        int own = 0, other = 0;
        for (const auto& sp : spans)
        {
            if (!(e.primary.time_s >= sp.start && e.primary.time_s < sp.stop)) continue;
            if (sp.trigger >= e.primary.time_s - 100e-6 && sp.trigger <= e.primary.time_s + 1e-3)
                ++own;
            else
                ++other;
        }
        EXPECT_EQ(own, 1) << "deposit at " << e.primary.time_s;
        noise_overlaps += other;
    }
    EXPECT_LE(noise_overlaps, 6);
}

TEST(RunDaq, LivetimeIsWholeSamples)
{
    DaqConfig cfg;
    cfg.trigger.rms_estimation_s = 0.1;
    auto s = run_daq({}, 0.123456, cfg, 1, 1, [](WaveformRecord&&) {});
    EXPECT_EQ(s.n_samples, 12345);
    EXPECT_DOUBLE_EQ(s.livetime_s, 0.12345);
    auto empty = run_daq({}, 0.0, cfg, 1, 1, [](WaveformRecord&&) {});
    EXPECT_EQ(empty.records, 0u);
}

TEST(RunDaq, RecordsIndependentOfWorkerCount)
{
    DaqConfig cfg;
    std::vector<SimEvent> ev;
    for (int i = 0; i < 20; ++i)
        ev.push_back(deposit_event(static_cast<std::uint64_t>(i), 2.05 + 0.07 * i,
                                   {{static_cast<DetectorId>(i % 3), 150.0}}));
    auto collect = [&](unsigned workers) {
        std::vector<WaveformRecord> out;
        run_daq(ev, 4.0, cfg, 21, workers, [&](WaveformRecord&& r) { out.push_back(std::move(r)); });
        return out;
    };
    auto a = collect(1), b = collect(3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        EXPECT_EQ(a[i].start_sample, b[i].start_sample);
        EXPECT_EQ(a[i].channels, b[i].channels);
    }
}

TEST(RobustSigma, GaussianAndOutliers)
{
    Engine rng(3);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> x(100000);
    for (auto& v : x) v = g(rng);
    for (int i = 0; i < 1000; ++i) x[static_cast<std::size_t>(i)] = 1e6;
    EXPECT_NEAR(robust_sigma(x), 2.0, 0.05);
    EXPECT_EQ(robust_sigma({}), 0.0);
}
