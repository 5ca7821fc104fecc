// File formats: event and pulse CSV streams, the binary waveform-record file
// and histogram export.
#pragma once

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coincidence.hpp"
#include "core.hpp"
#include "daq.hpp"
#include "pulse.hpp"
#include "transport.hpp"

namespace muontag {

inline constexpr int kEventsFormatVersion = 1;
inline constexpr int kPulsesFormatVersion = 1;
inline constexpr std::uint32_t kRecordFormatVersion = 1;
inline constexpr char kRecordMagic[8] = {'M', 'T', 'A', 'G', 'W', 'F', 'R', 'M'};

namespace detail {
inline std::string format(const char* fmt, auto... args)
{
    int n = std::snprintf(nullptr, 0, fmt, args...);
    std::string s(static_cast<std::size_t>(n), '\0');
    std::snprintf(s.data(), s.size() + 1, fmt, args...);
    return s;
}

inline std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line)
    {
        if (c == sep)
        {
            out.push_back(cur);
            cur.clear();
        }
        else if (c != '\r')
        {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const char* what)
{
    try
    {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw FormatError("");
        return v;
    }
    catch (const std::exception&)
    {
        throw FormatError(std::string("cannot parse ") + what + " from '" + s + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& s, const char* what)
{
    try
    {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw FormatError("");
        return v;
    }
    catch (const std::exception&)
    {
        throw FormatError(std::string("cannot parse ") + what + " from '" + s + "'");
    }
}

//! Parse "key=value" tokens following a "# <magic>" header line.
inline std::map<std::string, std::string> parse_header(const std::string& line, const std::string& magic)
{
    std::istringstream in(line);
    std::string hash, tag;
    in >> hash >> tag;
    if (hash != "#" || tag != magic) throw FormatError("missing '" + magic + "' header");
    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok)
    {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError("malformed header token '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

template<class T>
void put_le(std::ostream& out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template<class T>
bool get_le(std::istream& in, T& value)
{
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
    return true;
}
}  // namespace detail

//! Header metadata of an event file.
struct EventFileInfo
{
    double livetime_s = 0.0;
    bool complete = true;
    std::uint64_t seed = 0;
};

/*!
 * Events as CSV: a "# muontag-events" header line with version and livetime,
 * a column line, then event_id,species,t_s,TOP_keV,CENTER_keV,BOTTOM_keV with
 * empty fields for detectors without a deposit.
 */
inline void write_events(std::ostream& out, const std::vector<SimEvent>& events, const EventFileInfo& info)
{
    out << detail::format("# muontag-events version=%d livetime_s=%.17g complete=%d seed=%" PRIu64 "\n",
                          kEventsFormatVersion, info.livetime_s, info.complete ? 1 : 0, info.seed);
    out << "event_id,species,t_s,TOP_keV,CENTER_keV,BOTTOM_keV\n";
    for (const auto& e : events)
    {
        std::string line = detail::format("%" PRIu64 ",%s,%.9f", e.event_id,
                                          std::string(to_string(e.primary.species)).c_str(), e.primary.time_s);
        for (auto id : kAllDetectors)
        {
            line += ',';
            double v = e.energy_kev(id);
            if (v > 0) line += detail::format("%.6f", v);
        }
        out << line << '\n';
    }
}

inline std::vector<SimEvent> read_events(std::istream& in, EventFileInfo* info = nullptr)
{
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty event file");
    auto kv = detail::parse_header(line, "muontag-events");
    if (kv["version"] != std::to_string(kEventsFormatVersion))
        throw FormatError("unsupported event file version '" + kv["version"] + "'");
    EventFileInfo meta;
    meta.livetime_s = detail::parse_double(kv["livetime_s"], "livetime_s");
    meta.complete = kv["complete"] != "0";
    if (kv.count("seed")) meta.seed = detail::parse_u64(kv["seed"], "seed");
    if (info) *info = meta;
    if (!std::getline(in, line) || line != "event_id,species,t_s,TOP_keV,CENTER_keV,BOTTOM_keV")
        throw FormatError("unexpected event file column header");
    std::vector<SimEvent> events;
    while (std::getline(in, line))
    {
        if (line.empty()) continue;
        auto f = detail::split(line, ',');
        if (f.size() != 6) throw FormatError("event line has " + std::to_string(f.size()) + " fields");
        SimEvent e;
        e.event_id = detail::parse_u64(f[0], "event_id");
        e.primary.species = species_from_string(f[1]);
        e.primary.time_s = detail::parse_double(f[2], "t_s");
        for (int c = 0; c < kNumDetectors; ++c)
        {
            if (f[3 + c].empty()) continue;
            double v = detail::parse_double(f[3 + c], "deposit");
            if (!(v > 0)) throw FormatError("deposit energies must be positive");
            e.deposits.push_back({static_cast<DetectorId>(c), v, e.primary.time_s});
        }
        events.push_back(std::move(e));
    }
    return events;
}

//! Primaries of recorded events: species, energy_MeV, x, y, z, dx, dy, dz, t_s.
inline void write_primaries(std::ostream& out, const std::vector<SimEvent>& events)
{
    out << "species,energy_MeV,x,y,z,dx,dy,dz,t_s\n";
    for (const auto& e : events)
    {
        const auto& p = e.primary;
        out << detail::format("%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9f\n",
                              std::string(to_string(p.species)).c_str(), p.energy_mev, p.origin.x, p.origin.y,
                              p.origin.z, p.direction.x, p.direction.y, p.direction.z, p.time_s);
    }
}

struct PulseFileInfo
{
    double livetime_s = 0.0;
};

inline void write_pulses(std::ostream& out, const std::vector<Pulse>& pulses, const PulseFileInfo& info)
{
    out << detail::format("# muontag-pulses version=%d livetime_s=%.17g\n", kPulsesFormatVersion, info.livetime_s);
    out << "record_id,channel,t0_s,peak_time_us,amplitude,baseline_rms\n";
    for (const auto& p : pulses)
        out << detail::format("%" PRIu64 ",%s,%.9f,%.4f,%.6g,%.6g\n", p.record_id,
                              std::string(to_string(p.channel)).c_str(), p.t0_s, p.peak_time_us, p.amplitude,
                              p.baseline_rms);
}

inline std::vector<Pulse> read_pulses(std::istream& in, PulseFileInfo* info = nullptr)
{
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty pulse file");
    auto kv = detail::parse_header(line, "muontag-pulses");
    if (kv["version"] != std::to_string(kPulsesFormatVersion))
        throw FormatError("unsupported pulse file version '" + kv["version"] + "'");
    if (info) info->livetime_s = detail::parse_double(kv["livetime_s"], "livetime_s");
    if (!std::getline(in, line) || line != "record_id,channel,t0_s,peak_time_us,amplitude,baseline_rms")
        throw FormatError("unexpected pulse file column header");
    std::vector<Pulse> pulses;
    while (std::getline(in, line))
    {
        if (line.empty()) continue;
        auto f = detail::split(line, ',');
        if (f.size() != 6) throw FormatError("pulse line has " + std::to_string(f.size()) + " fields");
        Pulse p;
        p.record_id = detail::parse_u64(f[0], "record_id");
        p.channel = detector_from_string(f[1]);
        p.t0_s = detail::parse_double(f[2], "t0_s");
        p.peak_time_us = detail::parse_double(f[3], "peak_time_us");
        p.amplitude = detail::parse_double(f[4], "amplitude");
        p.baseline_rms = detail::parse_double(f[5], "baseline_rms");
        pulses.push_back(p);
    }
    return pulses;
}

inline void write_histogram_csv(std::ostream& out, const DelayHistogram& h)
{
    out << "bin_low_us,bin_high_us,counts\n";
    for (std::size_t i = 0; i < h.n_bins(); ++i)
        out << detail::format("%.3f,%.3f,%" PRIu64 "\n", h.bin_low(i), h.bin_low(i) + h.bin_width(), h.count(i));
}

/*!
 * Binary waveform-record file, little-endian.
 *
 *   file header : char[8] "MTAGWFRM", u32 version, u32 n_channels,
 *                 u32 n_samples, u32 pre_trigger_samples, f64 sampling_rate_hz,
 *                 f64 livetime_s, u8 channel_id[n_channels]
 *   per record  : u64 record_id, i64 t0_sec, i64 t0_nsec, i64 start_sample,
 *                 u32 trigger_sample, u8 trigger_channel, u8 pad[3],
 *                 f32 samples[n_channels][n_samples]
 */
struct RecordFileHeader
{
    std::uint32_t version = kRecordFormatVersion;
    std::uint32_t n_channels = kNumDetectors;
    std::uint32_t n_samples = 0;
    std::uint32_t pre_trigger_samples = 0;
    double sampling_rate_hz = 0.0;
    double livetime_s = 0.0;
};

class RecordWriter
{
  public:
    RecordWriter(const std::string& path, const RecordFileHeader& header) : header_(header)
    {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error("cannot open '" + path + "' for writing");
        out_.write(kRecordMagic, sizeof(kRecordMagic));
        detail::put_le(out_, header.version);
        detail::put_le(out_, header.n_channels);
        detail::put_le(out_, header.n_samples);
        detail::put_le(out_, header.pre_trigger_samples);
        detail::put_le(out_, header.sampling_rate_hz);
        detail::put_le(out_, header.livetime_s);
        for (std::uint32_t c = 0; c < header.n_channels; ++c) detail::put_le(out_, static_cast<std::uint8_t>(c));
    }

    void write(const WaveformRecord& r)
    {
        if (r.n_samples() != header_.n_samples) throw InvalidArgument("record length differs from file header");
        detail::put_le(out_, r.record_id);
        detail::put_le(out_, r.t0_sec);
        detail::put_le(out_, r.t0_nsec);
        detail::put_le(out_, r.start_sample);
        detail::put_le(out_, r.trigger_sample);
        detail::put_le(out_, static_cast<std::uint8_t>(index_of(r.trigger_channel)));
        const char pad[3] = {0, 0, 0};
        out_.write(pad, 3);
        for (const auto& ch : r.channels)
            for (float v : ch) detail::put_le(out_, v);
        ++count_;
    }

    void close()
    {
        out_.flush();
        if (!out_) throw Error("error while writing the record file");
        out_.close();
    }

    std::uint64_t count() const { return count_; }

  private:
    RecordFileHeader header_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
};

class RecordReader
{
  public:
    explicit RecordReader(const std::string& path) : path_(path)
    {
        in_.open(path, std::ios::binary);
        if (!in_) throw Error("cannot open record file '" + path + "'");
        char magic[8];
        if (!in_.read(magic, 8) || std::memcmp(magic, kRecordMagic, 8) != 0)
            throw FormatError("'" + path + "' is not a waveform record file (bad magic)");
        bool ok = detail::get_le(in_, header_.version);
        if (ok && header_.version != kRecordFormatVersion)
            throw FormatError("unsupported record file version " + std::to_string(header_.version));
        ok = ok && detail::get_le(in_, header_.n_channels) && detail::get_le(in_, header_.n_samples)
             && detail::get_le(in_, header_.pre_trigger_samples) && detail::get_le(in_, header_.sampling_rate_hz)
             && detail::get_le(in_, header_.livetime_s);
        if (!ok) throw FormatError("truncated record file header");
        if (header_.n_channels != kNumDetectors) throw FormatError("record file must have 3 channels");
        if (header_.n_samples == 0 || header_.pre_trigger_samples >= header_.n_samples
            || !(header_.sampling_rate_hz > 0) || !(header_.livetime_s >= 0))
            throw FormatError("inconsistent record file header");
        for (std::uint32_t c = 0; c < header_.n_channels; ++c)
        {
            std::uint8_t id = 0;
            if (!detail::get_le(in_, id)) throw FormatError("truncated record file header");
            if (id != c) throw FormatError("unexpected channel id in record file header");
        }
    }

    const RecordFileHeader& header() const { return header_; }

    //! Next record, or false at a clean end of file.
    bool next(WaveformRecord& r)
    {
        if (in_.peek() == std::char_traits<char>::eof()) return false;
        std::uint8_t ch = 0;
        char pad[3];
        bool ok = detail::get_le(in_, r.record_id) && detail::get_le(in_, r.t0_sec)
                  && detail::get_le(in_, r.t0_nsec) && detail::get_le(in_, r.start_sample)
                  && detail::get_le(in_, r.trigger_sample) && detail::get_le(in_, ch) && in_.read(pad, 3);
        if (!ok) throw FormatError("truncated record header in '" + path_ + "'");
        if (ch >= kNumDetectors) throw FormatError("invalid trigger channel in record");
        r.trigger_channel = static_cast<DetectorId>(ch);
        for (auto& c : r.channels)
        {
            c.resize(header_.n_samples);
            if constexpr (std::endian::native == std::endian::little)
            {
                if (!in_.read(reinterpret_cast<char*>(c.data()),
                              static_cast<std::streamsize>(c.size() * sizeof(float))))
                    throw FormatError("truncated record samples in '" + path_ + "'");
            }
            else
            {
                for (auto& v : c)
                    if (!detail::get_le(in_, v)) throw FormatError("truncated record samples");
            }
        }
        return true;
    }

    std::vector<WaveformRecord> read_batch(std::size_t max_records)
    {
        std::vector<WaveformRecord> out;
        WaveformRecord r;
        while (out.size() < max_records && next(r)) out.push_back(r);
        return out;
    }

  private:
    std::string path_;
    std::ifstream in_;
    RecordFileHeader header_;
};

//! Debug export: record_id,sample,t_s,TOP,CENTER,BOTTOM.
inline void write_records_csv(std::ostream& out, const std::vector<WaveformRecord>& records, double fs_hz)
{
    out << "record_id,sample,t_s,TOP,CENTER,BOTTOM\n";
    for (const auto& r : records)
        for (std::size_t i = 0; i < r.n_samples(); ++i)
            out << detail::format("%" PRIu64 ",%zu,%.9f,%.7g,%.7g,%.7g\n", r.record_id, i,
                                  r.t0_s() + static_cast<double>(i) / fs_hz, r.channels[0][i], r.channels[1][i],
                                  r.channels[2][i]);
}

}  // namespace muontag
