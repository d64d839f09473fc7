#pragma once

// Cosmic-photon random number chain: Poisson photon arrivals, digitization
// of the arrival time inside a window that ends at each clock edge, and the
// post-emission deadtime.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cosmicbell/chstats.hpp"
#include "cosmicbell/core.hpp"
#include "cosmicbell/qsim.hpp"

namespace cosmicbell::cosmicrng {

enum class Channel : std::uint8_t { Signal, Background, Unknown };

constexpr std::string_view to_string(Channel c) {
    switch (c) {
        case Channel::Signal: return "signal";
        case Channel::Background: return "background";
        case Channel::Unknown: return "unknown";
    }
    return "unknown";
}

inline Channel parse_channel(std::string_view s) {
    if (s == "signal") return Channel::Signal;
    if (s == "background") return Channel::Background;
    if (s == "unknown" || s.empty()) return Channel::Unknown;
    throw ValidationError("unknown channel tag '" + std::string(s) + "'");
}

struct PhotonEvent {
    std::int64_t t_ps = 0;
    Channel channel = Channel::Unknown;
    friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

using PhotonEventStream = std::vector<PhotonEvent>;

struct BitRecord {
    std::int64_t t_ps = 0;  // time of the digitized detection
    std::uint8_t bit = 0;
    std::int64_t clock_index = 0;  // edge k sits at k * clock_period
    friend bool operator==(const BitRecord&, const BitRecord&) = default;
};

/// Timing in integer picoseconds. Defaults: 2 MHz clock, 133.2 ns window,
/// 5 us deadtime.
struct ExtractorConfig {
    std::int64_t clock_period_ps = 500'000;
    std::int64_t window_ps = 133'200;
    std::int64_t deadtime_ps = 5'000'000;

    static ExtractorConfig from_units(double clock_period_ns, double window_ns, double deadtime_us) {
        auto to_ps = [](double v) { return static_cast<std::int64_t>(std::llround(v)); };
        ExtractorConfig c{to_ps(clock_period_ns * 1e3), to_ps(window_ns * 1e3), to_ps(deadtime_us * 1e6)};
        c.validate();
        return c;
    }

    void validate() const {
        if (clock_period_ps <= 0 || window_ps <= 0 || deadtime_ps <= 0)
            throw ValidationError("extractor timing parameters must be positive");
        if (window_ps >= clock_period_ps) throw ValidationError("acceptance window must be shorter than the clock period");
    }
};

/// Digitizes events: for each clock edge t_c, the first event in
/// [t_c - window, t_c) yields bit 0 in the earlier half and bit 1 in the
/// later half; after a bit is emitted, events for the next deadtime are ignored.
inline std::vector<BitRecord> extract_bits(std::span<const PhotonEvent> events, const ExtractorConfig& cfg = {}) {
    cfg.validate();
    std::vector<BitRecord> out;
    std::int64_t last_clock = std::numeric_limits<std::int64_t>::min();
    std::int64_t blocked_until = std::numeric_limits<std::int64_t>::min();
    std::int64_t prev_t = std::numeric_limits<std::int64_t>::min();
    for (const auto& ev : events) {
        if (ev.t_ps < prev_t) throw ValidationError("photon events are not time-ordered at t=" + std::to_string(ev.t_ps));
        prev_t = ev.t_ps;
        if (ev.t_ps < blocked_until) continue;
        // Edge strictly after the event.
        const std::int64_t k = (ev.t_ps >= 0 ? ev.t_ps / cfg.clock_period_ps
                                              : -((-ev.t_ps + cfg.clock_period_ps - 1) / cfg.clock_period_ps)) +
                               1;
        const std::int64_t edge = k * cfg.clock_period_ps;
        const std::int64_t open = edge - cfg.window_ps;
        if (ev.t_ps < open || k == last_clock) continue;
        const std::uint8_t bit = ev.t_ps < open + cfg.window_ps / 2 ? 0 : 1;
        out.push_back({ev.t_ps, bit, k});
        last_clock = k;
        blocked_until = ev.t_ps + cfg.deadtime_ps;
    }
    return out;
}

/// Inhomogeneous Poisson arrivals by thinning: candidates at `peak_rate_hz`
/// are kept with probability intensity(t_ps) in [0, 1].
inline PhotonEventStream simulate_thinned(double peak_rate_hz, double duration_s, std::uint64_t seed, Channel channel,
                                          const std::function<double(std::int64_t)>& intensity) {
    if (!(peak_rate_hz >= 0.0) || !(duration_s >= 0.0)) throw ValidationError("rates and duration must be nonnegative");
    PhotonEventStream out;
    if (peak_rate_hz == 0.0 || duration_s == 0.0) return out;
    qsim::Rng rng(seed);
    const double horizon_ps = duration_s * 1e12;
    const double mean_gap_ps = 1e12 / peak_rate_hz;
    double t = 0.0;
    std::int64_t prev = -1;
    while (true) {
        t += -std::log1p(-rng.uniform()) * mean_gap_ps;
        if (t >= horizon_ps) break;
        auto ts = static_cast<std::int64_t>(t);
        if (intensity && rng.uniform() >= intensity(ts)) continue;
        if (ts <= prev) ts = prev + 1;  // picosecond ties
        out.push_back({ts, channel});
        prev = ts;
    }
    return out;
}

/// Merges two time-ordered streams, keeping timestamps strictly increasing.
inline PhotonEventStream merge_streams(const PhotonEventStream& a, const PhotonEventStream& b) {
    PhotonEventStream out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    while (i < a.size() || j < b.size()) {
        const bool take_a = j >= b.size() || (i < a.size() && a[i].t_ps <= b[j].t_ps);
        PhotonEvent ev = take_a ? a[i++] : b[j++];
        if (ev.t_ps <= prev) ev.t_ps = prev + 1;
        prev = ev.t_ps;
        out.push_back(ev);
    }
    return out;
}

/// Superposed homogeneous Poisson processes tagged signal/background.
inline PhotonEventStream simulate_arrivals(double rate_signal_hz, double rate_background_hz, double duration_s,
                                           std::uint64_t seed) {
    if (!(rate_signal_hz >= 0.0) || !(rate_background_hz >= 0.0)) throw ValidationError("rates must be nonnegative");
    const auto sig = simulate_thinned(rate_signal_hz, duration_s, qsim::splitmix64(seed ^ 0x5167ULL), Channel::Signal, {});
    const auto bkg =
        simulate_thinned(rate_background_hz, duration_s, qsim::splitmix64(seed ^ 0xb4c6ULL), Channel::Background, {});
    return merge_streams(sig, bkg);
}

/// Relative intensity that is `late_factor` times higher in the second half
/// of every acceptance window than elsewhere (normalized so the peak is 1).
inline std::function<double(std::int64_t)> late_half_boost(double late_factor, const ExtractorConfig& cfg = {}) {
    if (!(late_factor >= 1.0)) throw ValidationError("late_factor must be >= 1");
    return [late_factor, cfg](std::int64_t t) {
        std::int64_t phase = t % cfg.clock_period_ps;
        if (phase < 0) phase += cfg.clock_period_ps;
        const bool late = phase >= cfg.clock_period_ps - cfg.window_ps / 2;
        return late ? 1.0 : 1.0 / late_factor;
    };
}

struct BitCounts {
    std::uint64_t zeros = 0;
    std::uint64_t ones = 0;
    std::uint64_t total() const { return zeros + ones; }
};

inline BitCounts count_bits(std::span<const BitRecord> bits) {
    BitCounts c;
    for (const auto& b : bits) (b.bit ? c.ones : c.zeros) += 1;
    return c;
}

/// r = #0 / #1 from on-source bits and SNR = (on-source rate - dark rate) / dark rate.
/// An undefined ratio or a zero dark rate yields +infinity with the degenerate flag.
inline chstats::BiasMonitor ratio_snr(std::span<const BitRecord> on_source, double on_duration_s,
                                      std::span<const BitRecord> dark, double dark_duration_s) {
    if (on_source.empty()) throw ValidationError("ratio_snr: empty on-source record");
    if (!(on_duration_s > 0.0) || !(dark_duration_s > 0.0)) throw ValidationError("ratio_snr: durations must be positive");
    constexpr double inf = std::numeric_limits<double>::infinity();
    chstats::BiasMonitor m;
    const auto c = count_bits(on_source);
    if (c.ones == 0) {
        m.r = inf;
        m.degenerate = true;
    } else {
        m.r = static_cast<double>(c.zeros) / static_cast<double>(c.ones);
    }
    const double on_rate = static_cast<double>(on_source.size()) / on_duration_s;
    const double dark_rate = static_cast<double>(dark.size()) / dark_duration_s;
    if (dark_rate == 0.0) {
        m.snr = inf;
        m.degenerate = true;
    } else {
        m.snr = (on_rate - dark_rate) / dark_rate;
    }
    return m;
}

}  // namespace cosmicbell::cosmicrng
