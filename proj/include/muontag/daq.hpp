// Synthetic KID readout: pulse and noise synthesis, band-pass trigger and
// fixed-length multi-channel records.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "transport.hpp"

namespace muontag {

//! Double-exponential phonon pulse with unit peak before gain.
struct PulseTemplate
{
    double rise_time_us = 50.0;
    double decay_time_us = 500.0;
    double gain_per_kev = 1.0;

    void validate() const
    {
        if (!(rise_time_us > 0 && decay_time_us > rise_time_us))
            throw ConfigError("pulse template needs decay_time > rise_time > 0");
        if (!(gain_per_kev > 0)) throw ConfigError("pulse gain must be positive");
    }

    double peak_time_us() const
    {
        double r = rise_time_us, d = decay_time_us;
        return r * d / (d - r) * std::log(d / r);
    }

    double shape(double t_us) const
    {
        if (t_us <= 0) return 0.0;
        double tp = peak_time_us();
        double norm = std::exp(-tp / decay_time_us) - std::exp(-tp / rise_time_us);
        return (std::exp(-t_us / decay_time_us) - std::exp(-t_us / rise_time_us)) / norm;
    }
};

inline double pulse_shape(double t_us, const PulseTemplate& tmpl)
{
    return tmpl.shape(t_us);
}

/*!
 * Per-channel additive noise.
 *
 * White Gaussian noise of `white_rms`, plus an optional 1/f component whose
 * one-sided density equals the white level at `low_freq_knee_hz` (0 = off).
 * The 1/f part is a bank of AR(1) processes with log-spaced corners.
 */
struct NoiseModel
{
    double white_rms = 3.75;
    double low_freq_knee_hz = 0.0;

    void validate() const
    {
        if (!(white_rms > 0)) throw ConfigError("white_rms must be positive");
        if (!(low_freq_knee_hz >= 0)) throw ConfigError("low_freq_knee_hz must be non-negative");
    }
};

struct TriggerConfig
{
    double threshold_sigma = 5.0;
    double bandpass_low_hz = 20.0;
    double bandpass_high_hz = 2000.0;
    //! Leading stretch of the filtered stream used for the robust RMS.
    double rms_estimation_s = 2.0;
    //! Every channel must stay below threshold this long before re-arming.
    double rearm_holdoff_us = 1000.0;
};

struct DaqConfig
{
    double sampling_rate_hz = 1e5;
    std::size_t record_samples = 2400;
    std::size_t pre_trigger_samples = 600;
    std::array<PulseTemplate, kNumDetectors> templates{};
    NoiseModel noise;
    TriggerConfig trigger;
    double onset_jitter_us = 40.0;
    std::size_t block_samples = 65536;
    double pulse_cutoff_decays = 20.0;

    double dt_s() const { return 1.0 / sampling_rate_hz; }

    void validate() const
    {
        if (!(sampling_rate_hz > 0)) throw ConfigError("sampling rate must be positive");
        if (record_samples < 16) throw ConfigError("record_samples must be at least 16");
        if (pre_trigger_samples >= record_samples)
            throw ConfigError("pre_trigger_samples must be below record_samples");
        for (const auto& t : templates) t.validate();
        noise.validate();
        if (!(trigger.threshold_sigma > 0)) throw ConfigError("threshold_sigma must be positive");
        if (!(trigger.bandpass_low_hz > 0 && trigger.bandpass_high_hz > trigger.bandpass_low_hz
              && trigger.bandpass_high_hz < 0.5 * sampling_rate_hz))
            throw ConfigError("band-pass corners must satisfy 0 < low < high < Nyquist");
        if (!(trigger.rms_estimation_s > 0)) throw ConfigError("rms_estimation_s must be positive");
        if (!(trigger.rearm_holdoff_us >= 0)) throw ConfigError("rearm_holdoff_us must be non-negative");
        if (!(onset_jitter_us >= 0)) throw ConfigError("onset_jitter_us must be non-negative");
        if (block_samples < record_samples) throw ConfigError("block_samples must be >= record_samples");
        if (!(pulse_cutoff_decays > 0)) throw ConfigError("pulse_cutoff_decays must be positive");
    }
};

//! First-order IIR section y = b0 x + b1 x[-1] - a1 y[-1].
struct FirstOrderSection
{
    double b0 = 1.0, b1 = 0.0, a1 = 0.0;
    double x1 = 0.0, y1 = 0.0;

    double process(double x)
    {
        double y = b0 * x + b1 * x1 - a1 * y1;
        x1 = x;
        y1 = y;
        return y;
    }

    std::complex<double> response(double f_hz, double fs_hz) const
    {
        std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * f_hz / fs_hz);
        return (b0 + b1 * z1) / (1.0 + a1 * z1);
    }

    //! Bilinear transform of s/(s + ωc) with pre-warping.
    static FirstOrderSection high_pass(double fc_hz, double fs_hz)
    {
        double k = std::tan(kPi * fc_hz / fs_hz);
        return {1.0 / (1.0 + k), -1.0 / (1.0 + k), (k - 1.0) / (k + 1.0)};
    }

    //! Bilinear transform of ωc/(s + ωc) with pre-warping.
    static FirstOrderSection low_pass(double fc_hz, double fs_hz)
    {
        return {k_over(fc_hz, fs_hz), k_over(fc_hz, fs_hz),
                (std::tan(kPi * fc_hz / fs_hz) - 1.0) / (std::tan(kPi * fc_hz / fs_hz) + 1.0)};
    }

  private:
    static double k_over(double fc_hz, double fs_hz)
    {
        double k = std::tan(kPi * fc_hz / fs_hz);
        return k / (1.0 + k);
    }
};

//! Streaming high-pass then low-pass.
class BandPass
{
  public:
    BandPass(double low_hz, double high_hz, double fs_hz)
        : hp_(FirstOrderSection::high_pass(low_hz, fs_hz)),
          lp_(FirstOrderSection::low_pass(high_hz, fs_hz)), fs_(fs_hz)
    {
    }

    double process(double x) { return lp_.process(hp_.process(x)); }

    std::complex<double> response(double f_hz) const
    {
        return hp_.response(f_hz, fs_) * lp_.response(f_hz, fs_);
    }

  private:
    FirstOrderSection hp_;
    FirstOrderSection lp_;
    double fs_;
};

struct WaveformRecord
{
    std::uint64_t record_id = 0;
    DetectorId trigger_channel = DetectorId::Top;
    std::int64_t start_sample = 0;       //!< absolute index of the first sample
    std::uint32_t trigger_sample = 0;    //!< trigger position within the record
    std::int64_t t0_sec = 0;             //!< record start time
    std::int64_t t0_nsec = 0;
    std::array<std::vector<float>, kNumDetectors> channels;

    double t0_s() const { return static_cast<double>(t0_sec) + 1e-9 * static_cast<double>(t0_nsec); }
    std::size_t n_samples() const { return channels[0].size(); }
};

//! Split an absolute sample index into integer seconds and nanoseconds.
inline void sample_to_time(std::int64_t sample, double fs_hz, std::int64_t& sec, std::int64_t& nsec)
{
    auto fs = static_cast<std::int64_t>(std::llround(fs_hz));
    if (std::abs(fs_hz - static_cast<double>(fs)) < 1e-9 && fs > 0)
    {
        sec = sample / fs;
        std::int64_t rem = sample % fs;
        nsec = static_cast<std::int64_t>(std::llround(static_cast<double>(rem) * 1e9 / fs_hz));
    }
    else
    {
        double t = static_cast<double>(sample) / fs_hz;
        sec = static_cast<std::int64_t>(std::floor(t));
        nsec = static_cast<std::int64_t>(std::llround((t - static_cast<double>(sec)) * 1e9));
    }
    if (nsec >= 1000000000)
    {
        sec += 1;
        nsec -= 1000000000;
    }
}

/*!
 * Continuous per-channel sample streams from a time-sorted event list.
 *
 * Streams are produced block by block in order. White noise for (channel,
 * block) comes from its own seeded generator; each deposit gets a Gaussian
 * onset jitter drawn from a generator keyed by (event, channel). The output
 * therefore does not depend on how channels are spread over workers.
 */
class StreamSynthesizer
{
  public:
    StreamSynthesizer(const std::vector<SimEvent>& events, const DaqConfig& cfg,
                      std::uint64_t seed, std::int64_t n_samples)
        : cfg_(cfg), seed_(seed), n_samples_(n_samples)
    {
        cfg.validate();
        if (n_samples < 0) throw InvalidArgument("stream length must be non-negative");
        for (std::size_t i = 1; i < events.size(); ++i)
            if (events[i].primary.time_s < events[i - 1].primary.time_s)
                throw InvalidArgument("event stream is not time-sorted");
        for (const auto& e : events)
        {
            for (const auto& d : e.deposits)
            {
                int c = index_of(d.detector);
                double onset = d.time_s;
                if (cfg.onset_jitter_us > 0)
                {
                    Engine rng = make_engine(seed, Stream::OnsetJitter, e.event_id,
                                             static_cast<std::uint64_t>(c));
                    std::normal_distribution<double> g(0.0, cfg.onset_jitter_us * 1e-6);
                    onset += g(rng);
                }
                double amp = cfg.templates[c].gain_per_kev * d.energy_kev;
                pulses_[c].push_back({onset, amp});
            }
        }
        for (auto& list : pulses_)
            std::stable_sort(list.begin(), list.end(),
                             [](const Pulse& a, const Pulse& b) { return a.onset_s < b.onset_s; });
        init_pink();
    }

    std::int64_t n_samples() const { return n_samples_; }
    std::size_t n_blocks() const
    {
        auto b = static_cast<std::int64_t>(cfg_.block_samples);
        return static_cast<std::size_t>((n_samples_ + b - 1) / b);
    }

    //! Samples of the next block, all channels. Blocks must be requested in order.
    std::array<std::vector<double>, kNumDetectors> next_block(unsigned workers = 1)
    {
        if (next_ >= n_blocks()) throw InvalidArgument("stream exhausted");
        std::size_t b = next_++;
        std::array<std::vector<double>, kNumDetectors> out;
        parallel_for(kNumDetectors, workers, [&](std::size_t c) { out[c] = channel_block(c, b); });
        return out;
    }

  private:
    struct Pulse
    {
        double onset_s;
        double amplitude;
    };
    struct PinkPole
    {
        double a;
        double drive;
    };

    void init_pink()
    {
        if (cfg_.noise.low_freq_knee_hz <= 0) return;
        double fs = cfg_.sampling_rate_hz;
        double white_psd = 2.0 * cfg_.noise.white_rms * cfg_.noise.white_rms / fs;
        double amplitude = white_psd * cfg_.noise.low_freq_knee_hz;  // S(f) = amplitude / f
        double ratio = std::sqrt(10.0);
        double ln_r = std::log(ratio);
        for (double fk = 0.1; fk < 0.5 * fs; fk *= ratio)
        {
            double a = std::exp(-2.0 * kPi * fk / fs);
            double var = amplitude * ln_r;
            poles_.push_back({a, std::sqrt(var * (1.0 - a * a))});
        }
        for (auto& s : pink_state_) s.assign(poles_.size(), 0.0);
    }

    std::vector<double> channel_block(std::size_t c, std::size_t b)
    {
        auto bs = static_cast<std::int64_t>(cfg_.block_samples);
        std::int64_t n0 = static_cast<std::int64_t>(b) * bs;
        std::int64_t n1 = std::min(n_samples_, n0 + bs);
        std::vector<double> x(static_cast<std::size_t>(n1 - n0));

        Engine rng = make_engine(seed_, Stream::WhiteNoise, c, b);
        std::normal_distribution<double> white(0.0, cfg_.noise.white_rms);
        for (auto& v : x) v = white(rng);

        if (!poles_.empty())
        {
            Engine prng = make_engine(seed_, Stream::PinkNoise, c, b);
            std::normal_distribution<double> g(0.0, 1.0);
            auto& state = pink_state_[c];
            for (auto& v : x)
            {
                for (std::size_t k = 0; k < poles_.size(); ++k)
                {
                    state[k] = poles_[k].a * state[k] + poles_[k].drive * g(prng);
                    v += state[k];
                }
            }
        }

        const auto& tmpl = cfg_.templates[c];
        double dt = cfg_.dt_s();
        double cutoff = cfg_.pulse_cutoff_decays * tmpl.decay_time_us * 1e-6;
        double t_lo = static_cast<double>(n0) * dt;
        double t_hi = static_cast<double>(n1) * dt;
        const auto& list = pulses_[c];
        std::size_t& first = first_pulse_[c];
        while (first < list.size() && list[first].onset_s + cutoff < t_lo) ++first;
        double tp = tmpl.peak_time_us();
        double norm = std::exp(-tp / tmpl.decay_time_us) - std::exp(-tp / tmpl.rise_time_us);
        for (std::size_t i = first; i < list.size() && list[i].onset_s < t_hi; ++i)
        {
            const Pulse& p = list[i];
            auto k_lo = std::max(n0, static_cast<std::int64_t>(std::floor(p.onset_s / dt)) + 1);
            auto k_hi = std::min(n1, static_cast<std::int64_t>(std::ceil((p.onset_s + cutoff) / dt)));
            for (std::int64_t k = k_lo; k < k_hi; ++k)
            {
                double t_us = (static_cast<double>(k) * dt - p.onset_s) * 1e6;
                if (t_us <= 0) continue;
                double s = (std::exp(-t_us / tmpl.decay_time_us) - std::exp(-t_us / tmpl.rise_time_us)) / norm;
                x[static_cast<std::size_t>(k - n0)] += p.amplitude * s;
            }
        }
        return x;
    }

    DaqConfig cfg_;
    std::uint64_t seed_;
    std::int64_t n_samples_;
    std::array<std::vector<Pulse>, kNumDetectors> pulses_;
    std::array<std::size_t, kNumDetectors> first_pulse_{};
    std::vector<PinkPole> poles_;
    std::array<std::vector<double>, kNumDetectors> pink_state_;
    std::size_t next_ = 0;
};

//! Whole-stream synthesis into memory (short streams, tests).
inline std::array<std::vector<double>, kNumDetectors>
synthesize_stream(const std::vector<SimEvent>& events, const DaqConfig& cfg, std::uint64_t seed,
                  std::int64_t n_samples, unsigned workers = 1)
{
    StreamSynthesizer synth(events, cfg, seed, n_samples);
    std::array<std::vector<double>, kNumDetectors> out;
    for (std::size_t b = 0; b < synth.n_blocks(); ++b)
    {
        auto block = synth.next_block(workers);
        for (int c = 0; c < kNumDetectors; ++c) out[c].insert(out[c].end(), block[c].begin(), block[c].end());
    }
    return out;
}

//! Robust standard deviation: 1.4826 × median absolute deviation.
inline double robust_sigma(std::vector<double> x)
{
    if (x.empty()) return 0.0;
    auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    double med = *mid;
    for (auto& v : x) v = std::abs(v - med);
    std::nth_element(x.begin(), mid, x.end());
    return 1.4826 * *mid;
}

/*!
 * Band-pass trigger and record builder fed block by block.
 *
 * A trigger fires when the recorder is armed and any filtered channel rises
 * above its threshold; it re-arms once every channel has stayed below for
 * `rearm_holdoff_us` (at least one sample). Each
 * trigger cuts a record of all channels starting `pre_trigger_samples` before
 * the trigger sample. Records that would start before the stream or end
 * after it are dropped.
 */
class Recorder
{
  public:
    using Sink = std::function<void(WaveformRecord&&)>;

    Recorder(const DaqConfig& cfg, std::array<double, kNumDetectors> thresholds, Sink sink)
        : cfg_(cfg), thresholds_(thresholds), sink_(std::move(sink)),
          holdoff_(std::max<std::int64_t>(1, std::llround(cfg.trigger.rearm_holdoff_us * 1e-6 * cfg.sampling_rate_hz)))
    {
        for (int c = 0; c < kNumDetectors; ++c)
            filters_.emplace_back(cfg.trigger.bandpass_low_hz, cfg.trigger.bandpass_high_hz,
                                  cfg.sampling_rate_hz);
    }

    void push(const std::array<std::vector<double>, kNumDetectors>& block)
    {
        std::size_t n = block[0].size();
        for (int c = 0; c < kNumDetectors; ++c)
        {
            if (block[c].size() != n) throw InvalidArgument("channel blocks differ in length");
            buffer_[c].reserve(buffer_[c].size() + n);
            for (double v : block[c]) buffer_[c].push_back(static_cast<float>(v));
        }
        for (std::size_t i = 0; i < n; ++i)
        {
            bool any_above = false;
            int first_above = -1;
            for (int c = 0; c < kNumDetectors; ++c)
            {
                double y = filters_[c].process(block[c][i]);
                if (y > thresholds_[c])
                {
                    any_above = true;
                    if (first_above < 0) first_above = c;
                }
            }
            std::int64_t k = end_ + static_cast<std::int64_t>(i);
            if (armed_ && any_above)
            {
                pending_.push_back({k, static_cast<DetectorId>(first_above)});
                armed_ = false;
                ++triggers_;
            }
            if (!armed_)
            {
                below_ = any_above ? 0 : below_ + 1;
                if (below_ >= holdoff_) armed_ = true;
            }
        }
        end_ += static_cast<std::int64_t>(n);
        flush_ready();
        trim();
    }

    //! Drop triggers whose record runs past the end of the stream.
    void finish()
    {
        flush_ready();
        dropped_ += pending_.size();
        pending_.clear();
    }

    std::uint64_t triggers() const { return triggers_; }
    std::uint64_t records() const { return next_id_; }
    std::uint64_t dropped() const { return dropped_; }

  private:
    struct Pending
    {
        std::int64_t sample;
        DetectorId channel;
    };

    void flush_ready()
    {
        auto n = static_cast<std::int64_t>(cfg_.record_samples);
        auto pre = static_cast<std::int64_t>(cfg_.pre_trigger_samples);
        std::size_t used = 0;
        for (; used < pending_.size(); ++used)
        {
            const auto& p = pending_[used];
            std::int64_t start = p.sample - pre;
            if (start + n > end_) break;
            if (start < 0)
            {
                ++dropped_;
                continue;
            }
            WaveformRecord r;
            r.record_id = next_id_++;
            r.trigger_channel = p.channel;
            r.start_sample = start;
            r.trigger_sample = static_cast<std::uint32_t>(pre);
            sample_to_time(start, cfg_.sampling_rate_hz, r.t0_sec, r.t0_nsec);
            auto off = static_cast<std::ptrdiff_t>(start - buffer_start_);
            for (int c = 0; c < kNumDetectors; ++c)
                r.channels[c].assign(buffer_[c].begin() + off, buffer_[c].begin() + off + n);
            sink_(std::move(r));
        }
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(used));
    }

    void trim()
    {
        std::int64_t keep_from = std::max<std::int64_t>(
            buffer_start_, end_ - static_cast<std::int64_t>(cfg_.record_samples));
        if (!pending_.empty())
            keep_from = std::min(keep_from, std::max<std::int64_t>(
                buffer_start_, pending_.front().sample - static_cast<std::int64_t>(cfg_.pre_trigger_samples)));
        auto drop = static_cast<std::ptrdiff_t>(keep_from - buffer_start_);
        if (drop <= 0) return;
        for (auto& b : buffer_) b.erase(b.begin(), b.begin() + drop);
        buffer_start_ = keep_from;
    }

    DaqConfig cfg_;
    std::array<double, kNumDetectors> thresholds_;
    Sink sink_;
    std::int64_t holdoff_;
    std::int64_t below_ = 0;
    std::vector<BandPass> filters_;
    std::array<std::vector<float>, kNumDetectors> buffer_;
    std::int64_t buffer_start_ = 0;
    std::int64_t end_ = 0;
    bool armed_ = true;
    std::vector<Pending> pending_;
    std::uint64_t next_id_ = 0;
    std::uint64_t triggers_ = 0;
    std::uint64_t dropped_ = 0;
};

//! Robust RMS of the band-passed leading segment of each channel.
inline std::array<double, kNumDetectors>
estimate_trigger_rms(const std::array<std::vector<double>, kNumDetectors>& leading, const DaqConfig& cfg)
{
    std::array<double, kNumDetectors> rms{};
    for (int c = 0; c < kNumDetectors; ++c)
    {
        BandPass bp(cfg.trigger.bandpass_low_hz, cfg.trigger.bandpass_high_hz, cfg.sampling_rate_hz);
        std::vector<double> y;
        y.reserve(leading[c].size());
        for (double v : leading[c]) y.push_back(bp.process(v));
        rms[c] = robust_sigma(std::move(y));
        if (!(rms[c] > 0)) throw InvalidArgument("trigger RMS estimate is zero");
    }
    return rms;
}

/*!
 * Trigger and cut records from streams held in memory.
 */
inline std::vector<WaveformRecord>
trigger_and_record(const std::array<std::vector<double>, kNumDetectors>& streams, const DaqConfig& cfg,
                   std::array<double, kNumDetectors>* rms_out = nullptr)
{
    cfg.validate();
    std::size_t n = streams[0].size();
    for (const auto& s : streams)
        if (s.size() != n) throw InvalidArgument("streams are not aligned");
    auto lead = static_cast<std::size_t>(std::llround(cfg.trigger.rms_estimation_s * cfg.sampling_rate_hz));
    lead = std::min(lead, n);
    std::array<std::vector<double>, kNumDetectors> head;
    for (int c = 0; c < kNumDetectors; ++c) head[c].assign(streams[c].begin(), streams[c].begin() + static_cast<std::ptrdiff_t>(lead));
    auto rms = estimate_trigger_rms(head, cfg);
    if (rms_out) *rms_out = rms;
    std::array<double, kNumDetectors> thr{};
    for (int c = 0; c < kNumDetectors; ++c) thr[c] = cfg.trigger.threshold_sigma * rms[c];

    std::vector<WaveformRecord> out;
    Recorder rec(cfg, thr, [&](WaveformRecord&& r) { out.push_back(std::move(r)); });
    for (std::size_t i = 0; i < n; i += cfg.block_samples)
    {
        std::size_t j = std::min(n, i + cfg.block_samples);
        std::array<std::vector<double>, kNumDetectors> block;
        for (int c = 0; c < kNumDetectors; ++c)
            block[c].assign(streams[c].begin() + static_cast<std::ptrdiff_t>(i),
                            streams[c].begin() + static_cast<std::ptrdiff_t>(j));
        rec.push(block);
    }
    rec.finish();
    return out;
}

struct DaqSummary
{
    std::int64_t n_samples = 0;
    double livetime_s = 0.0;
    std::array<double, kNumDetectors> trigger_rms{};
    std::uint64_t triggers = 0;
    std::uint64_t records = 0;
    std::uint64_t dropped = 0;
};

/*!
 * Stream synthesis, trigger and recording over `livetime_s`.
 *
 * The trigger RMS is measured on the first `rms_estimation_s` of the stream,
 * which is then synthesised again from the start for recording.
 */
inline DaqSummary run_daq(const std::vector<SimEvent>& events, double livetime_s, const DaqConfig& cfg,
                          std::uint64_t seed, unsigned workers, const Recorder::Sink& sink)
{
    cfg.validate();
    if (!(livetime_s >= 0)) throw InvalidArgument("livetime must be non-negative");
    DaqSummary summary;
    summary.n_samples = static_cast<std::int64_t>(std::floor(livetime_s * cfg.sampling_rate_hz + 1e-9));
    summary.livetime_s = static_cast<double>(summary.n_samples) / cfg.sampling_rate_hz;
    if (summary.n_samples == 0) return summary;

    auto lead = std::min<std::int64_t>(
        summary.n_samples, std::llround(cfg.trigger.rms_estimation_s * cfg.sampling_rate_hz));
    {
        StreamSynthesizer head(events, cfg, seed, summary.n_samples);
        std::array<std::vector<double>, kNumDetectors> leading;
        while (static_cast<std::int64_t>(leading[0].size()) < lead)
        {
            auto block = head.next_block(workers);
            for (int c = 0; c < kNumDetectors; ++c)
                leading[c].insert(leading[c].end(), block[c].begin(), block[c].end());
        }
        for (auto& l : leading) l.resize(static_cast<std::size_t>(lead));
        summary.trigger_rms = estimate_trigger_rms(leading, cfg);
    }
    std::array<double, kNumDetectors> thr{};
    for (int c = 0; c < kNumDetectors; ++c) thr[c] = cfg.trigger.threshold_sigma * summary.trigger_rms[c];

    StreamSynthesizer synth(events, cfg, seed, summary.n_samples);
    Recorder rec(cfg, thr, sink);
    for (std::size_t b = 0; b < synth.n_blocks(); ++b) rec.push(synth.next_block(workers));
    rec.finish();
    summary.triggers = rec.triggers();
    summary.records = rec.records();
    summary.dropped = rec.dropped();
    return summary;
}

}  // namespace muontag
