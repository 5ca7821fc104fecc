#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/oracles.hpp"

using namespace muontag;

namespace {

constexpr std::size_t kN = 2400;
constexpr double kFs = 1e5;
constexpr double kDtUs = 10.0;

std::vector<double> noise_trace(Engine& rng, double sigma, std::size_t n = kN)
{
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

void add_pulse(std::vector<double>& x, const PulseTemplate& t, double amplitude, double onset_us)
{
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += amplitude * t.shape(static_cast<double>(i) * kDtUs - onset_us);
}

WaveformRecord record_from(const std::vector<double>& ch0)
{
    WaveformRecord r;
    for (auto& c : r.channels) c.assign(ch0.size(), 0.0f);
    r.channels[0].assign(ch0.begin(), ch0.end());
    return r;
}

std::vector<double> template_samples(const PulseTemplate& t)
{
    std::vector<double> s(kN);
    for (std::size_t i = 0; i < kN; ++i) s[i] = t.shape(static_cast<double>(i) * kDtUs);
    return s;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double stddev_of(const std::vector<double>& v)
{
    double m = mean_of(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(NoisePsd, WhiteNoiseIntegratesToVariance)
{
    Engine rng(1);
    const double sigma = 3.75;
    std::vector<WaveformRecord> recs;
    for (int i = 0; i < 100; ++i) recs.push_back(record_from(noise_trace(rng, sigma)));
    auto psd = estimate_noise_psd(recs, DetectorId::Top, kFs);
    EXPECT_EQ(psd.records_used, 100u);
    EXPECT_NEAR(psd.integrated_power(), sigma * sigma, 0.05 * sigma * sigma);
    // flat at 2σ²/fs away from DC
    double mid = 0;
    for (std::size_t k = 100; k < 1100; ++k) mid += psd.density[k];
    mid /= 1000.0;
    EXPECT_NEAR(mid, 2 * sigma * sigma / kFs, 0.05 * 2 * sigma * sigma / kFs);
    for (double d : psd.density) ASSERT_GT(d, 0.0);
    EXPECT_NEAR(psd.frequency(1), kFs / kN, 1e-12);
}

TEST(NoisePsd, RecordsWithPulsesExcluded)
{
    Engine rng(2);
    const double sigma = 3.75;
    PulseTemplate t;
    std::vector<WaveformRecord> clean, mixed;
    for (int i = 0; i < 60; ++i)
    {
        auto r = record_from(noise_trace(rng, sigma));
        clean.push_back(r);
        mixed.push_back(r);
    }
    for (int i = 0; i < 20; ++i)
    {
        auto x = noise_trace(rng, sigma);
        add_pulse(x, t, 100.0 * sigma, 6000.0 + 37.0 * i);
        mixed.push_back(record_from(x));
    }
    auto ref = estimate_noise_psd(clean, DetectorId::Top, kFs);
    auto psd = estimate_noise_psd(mixed, DetectorId::Top, kFs);
    EXPECT_EQ(psd.records_used, 60u);
    EXPECT_NEAR(psd.integrated_power(), ref.integrated_power(), 0.05 * ref.integrated_power());
    for (std::size_t k = 1; k + 50 < psd.density.size(); k += 50)
    {
        double a = 0, b = 0;
        for (std::size_t j = k; j < k + 50; ++j)
        {
            a += psd.density[j];
            b += ref.density[j];
        }
        EXPECT_NEAR(a, b, 0.05 * b) << "band starting at bin " << k;
    }
}

TEST(NoisePsd, TooFewRecordsRejected)
{
    Engine rng(3);
    std::vector<WaveformRecord> one{record_from(noise_trace(rng, 1.0))};
    EXPECT_THROW(estimate_noise_psd(one, DetectorId::Top, kFs), InvalidArgument);
}

TEST(NoisePsd, PulseVeto)
{
    Engine rng(4);
    auto x = noise_trace(rng, 1.0);
    std::vector<float> f(x.begin(), x.end());
    EXPECT_TRUE(is_pulse_free(f));
    add_pulse(x, PulseTemplate{}, 20.0, 5000.0);
    std::vector<float> g(x.begin(), x.end());
    EXPECT_FALSE(is_pulse_free(g));
}

TEST(MatchedFilter, NoiselessPulseAmplitudeAndTime)
{
    PulseTemplate t;
    MatchedFilter mf(t, white_noise_psd(1.0, kN, kFs));
    for (double onset : {6000.0, 6003.0, 3217.5})
    {
        std::vector<double> x(kN, 0.0);
        add_pulse(x, t, 150.0, onset);
        auto r = mf.apply(x);
        EXPECT_NEAR(r.amplitude, 150.0, 0.01 * 150.0) << "onset " << onset;
        EXPECT_NEAR(r.peak_time_us, onset + t.peak_time_us(), kDtUs) << "onset " << onset;
    }
}

TEST(MatchedFilter, ShiftCovariantOnSampleGrid)
{
    PulseTemplate t;
    MatchedFilter mf(t, white_noise_psd(1.0, kN, kFs));
    std::vector<double> x(kN, 0.0);
    add_pulse(x, t, 80.0, 5000.0);
    auto base = mf.apply(x);
    for (int k : {1, 7, 100, 613})
    {
        std::vector<double> y(kN, 0.0);
        add_pulse(y, t, 80.0, 5000.0 + k * kDtUs);
        auto r = mf.apply(y);
        EXPECT_NEAR(r.peak_time_us - base.peak_time_us, k * kDtUs, 1e-6) << "shift " << k;
        EXPECT_NEAR(r.amplitude, base.amplitude, 1e-9 * base.amplitude);
    }
}

TEST(MatchedFilter, NoiselessLinearity)
{
    PulseTemplate t;
    MatchedFilter mf(t, white_noise_psd(1.0, kN, kFs));
    double ref = 0;
    for (double a : {1.0, 10.0, 100.0, 1000.0})
    {
        std::vector<double> x(kN, 0.0);
        add_pulse(x, t, a, 6000.0);
        double q = mf.apply(x).amplitude / a;
        if (ref == 0) ref = q;
        EXPECT_NEAR(q / ref, 1.0, 1e-6);
    }
}

TEST(MatchedFilter, ResolutionMatchesOptimalFilterFormula)
{
    PulseTemplate t;
    const double sigma = 3.75;
    MatchedFilter mf(t, white_noise_psd(sigma, kN, kFs));
    double oracle_var = oracle::optimal_filter_variance(template_samples(t), sigma);
    EXPECT_NEAR(mf.resolution() * mf.resolution(), oracle_var, 0.01 * oracle_var);
    // empirical spread of the estimate at a fixed lag over noise-only traces
    Engine rng(5);
    std::vector<double> est;
    for (int i = 0; i < 4000; ++i) est.push_back(mf.filter(noise_trace(rng, sigma))[600]);
    double var = stddev_of(est) * stddev_of(est);
    EXPECT_NEAR(var, oracle_var, 0.10 * oracle_var);
    EXPECT_NEAR(mean_of(est), 0.0, 5.0 * std::sqrt(oracle_var / 4000));
}

TEST(MatchedFilter, FilteredSnrBeatsRawPeak)
{
    PulseTemplate t;
    const double sigma = 1.0;
    MatchedFilter mf(t, white_noise_psd(sigma, kN, kFs));
    const double a = 3.0 * sigma;  // raw-peak SNR of 3
    EXPECT_GE(a / mf.resolution(), a / sigma);
    Engine rng(6);
    std::vector<double> at_lag;
    for (int i = 0; i < 2000; ++i)
    {
        auto x = noise_trace(rng, sigma);
        add_pulse(x, t, a, 6000.0);
        at_lag.push_back(mf.filter(x)[600]);
    }
    EXPECT_GE(mean_of(at_lag) / stddev_of(at_lag), a / sigma);
}

TEST(MatchedFilter, UnbiasedAndPreciseAtTwentySigma)
{
    PulseTemplate t;
    const double sigma = 3.75;
    MatchedFilter mf(t, white_noise_psd(sigma, kN, kFs));
    const double a = 20.0 * mf.resolution();
    Engine rng(7);
    std::uniform_real_distribution<double> jitter(0.0, kDtUs);
    std::vector<double> amp, dt;
    for (int i = 0; i < 2000; ++i)
    {
        double onset = 6000.0 + jitter(rng);
        auto x = noise_trace(rng, sigma);
        add_pulse(x, t, a, onset);
        auto r = mf.apply(x);
        amp.push_back(r.amplitude);
        dt.push_back(r.peak_time_us - (onset + t.peak_time_us()));
    }
    EXPECT_NEAR(mean_of(amp), a, 0.005 * a);
    EXPECT_LT(stddev_of(dt), 20.0);
}

TEST(MatchedFilter, BaselineRmsTracksResolution)
{
    PulseTemplate t;
    const double sigma = 3.75;
    MatchedFilter mf(t, white_noise_psd(sigma, kN, kFs));
    Engine rng(8);
    std::vector<double> rms;
    for (int i = 0; i < 200; ++i) rms.push_back(mf.apply(noise_trace(rng, sigma)).baseline_rms);
    EXPECT_NEAR(mean_of(rms), mf.resolution(), 0.05 * mf.resolution());
}

TEST(MatchedFilter, PileUpReportedAsExtraPulse)
{
    PulseTemplate t;
    MatchedFilter mf(t, white_noise_psd(1.0, kN, kFs));
    Engine rng(9);
    auto x = noise_trace(rng, 1.0);
    add_pulse(x, t, 100.0, 6000.0);
    add_pulse(x, t, 60.0, 12000.0);
    auto r = mf.apply(x);
    EXPECT_NEAR(r.amplitude, 100.0, 3.0);
    ASSERT_EQ(r.extras.size(), 1u);
    EXPECT_NEAR(r.extras[0].first, 60.0, 3.0);
    EXPECT_NEAR(r.extras[0].second, 12000.0 + t.peak_time_us(), 3 * kDtUs);
}

TEST(MatchedFilter, GridMismatchRejected)
{
    PulseTemplate t;
    auto psd = white_noise_psd(1.0, 1000, kFs);
    WaveformRecord r = record_from(std::vector<double>(kN, 0.0));
    EXPECT_THROW(matched_filter(r, t, psd, DetectorId::Top), InvalidArgument);
    MatchedFilter mf(t, psd);
    EXPECT_THROW(mf.filter(std::vector<double>(kN, 0.0)), InvalidArgument);
    NoisePSD broken = psd;
    broken.density.pop_back();
    EXPECT_THROW(MatchedFilter(t, broken), InvalidArgument);
}

TEST(SelectPulses, ThresholdExamples)
{
    Pulse low, high;
    low.baseline_rms = high.baseline_rms = 2.0;
    low.amplitude = 4.9 * 2.0;
    high.amplitude = 5.1 * 2.0;
    auto kept = select_pulses({low, high}, 5.0);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].amplitude, high.amplitude);
}

TEST(SelectPulses, NoiseRecordSurvivalBelowOnePerMille)
{
    PulseTemplate t;
    const double sigma = 3.75;
    MatchedFilter mf(t, white_noise_psd(sigma, kN, kFs));
    std::array<const MatchedFilter*, kNumDetectors> filters{&mf, nullptr, nullptr};
    Engine rng(10);
    const int n = 10000;
    int survived = 0;
    for (int i = 0; i < n; ++i)
    {
        auto rec = record_from(noise_trace(rng, sigma));
        rec.record_id = static_cast<std::uint64_t>(i);
        if (!select_pulses(reconstruct_record(rec, filters), 5.0).empty()) ++survived;
    }
    EXPECT_LT(static_cast<double>(survived) / n, 1e-3) << survived << " of " << n;
}

TEST(ReconstructRecord, PulseFieldsFilled)
{
    PulseTemplate t;
    MatchedFilter mf(t, white_noise_psd(1.0, kN, kFs));
    std::array<const MatchedFilter*, kNumDetectors> filters{&mf, &mf, &mf};
    std::vector<double> x(kN, 0.0);
    add_pulse(x, t, 50.0, 6000.0);
    auto rec = record_from(x);
    rec.record_id = 42;
    rec.t0_sec = 3;
    rec.t0_nsec = 500000000;
    auto pulses = reconstruct_record(rec, filters);
    ASSERT_GE(pulses.size(), 3u);
    EXPECT_EQ(pulses[0].channel, DetectorId::Top);
    EXPECT_EQ(pulses[0].record_id, 42u);
    EXPECT_DOUBLE_EQ(pulses[0].t0_s, 3.5);
    EXPECT_NEAR(pulses[0].amplitude, 50.0, 0.5);
    for (const auto& p : pulses)
    {
        EXPECT_GE(p.amplitude, 0.0);
        EXPECT_GE(p.peak_time_us, 0.0);
    }
}
