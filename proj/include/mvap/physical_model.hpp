#pragma once

// Closed-form latency and rate model of an MVAP that collects sensor data from
// N devices (MVDs), splits processing between its own CPU and an edge server
// (ECS), and delivers the result to Metaverse users.
//
// All functions are pure. Randomness (Rice fading, CPU draws, SINR) is sampled
// by the caller and passed in.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "mvap/error.hpp"
#include "mvap/random.hpp"

namespace mvap {

/// One sensing device feeding the MVAP.
struct MvdParams {
    double sensing_time_s = 0.5;
    double sensing_rate_pps = 5.0;
    double packet_bits = 1920.0 * 1080.0;
    double distance_m = 180.0;
    double tx_power_w = 0.52;
    double bandwidth_hz = 300e6;
};

/// Device-to-MVAP line-of-sight channel. `pathloss_ref` absorbs the carrier-frequency
/// and LoS attenuation prefactor; `rice_k_factor` is the linear Rician K.
struct ChannelParams {
    double pathloss_ref = 1e-6;
    double pathloss_exponent = 2.2;
    double noise_variance_w = 1e-11;
    double capacity_gap = 1.2;
    double rice_k_factor = 10.0;
};

struct ComputeParams {
    double f_mvap_hz = 10.5e9;
    double f_ecs_hz = 20.5e9;
    double complexity_cycles_per_bit = 650.0;
    double w_mvap_hz = 5e6;
    double delivery_time_s = 0.05;
};

struct OffloadLatency {
    double t_offloading_s = 0.0;      // transfer to the ECS
    double t_offloading_ecs_s = 0.0;  // transfer plus ECS compute
};

struct LatencyBreakdown {
    double t_sensing_comm_s = 0.0;
    double t_local_s = 0.0;
    double t_offloading_s = 0.0;
    double t_offloading_ecs_s = 0.0;
    double t_delivery_s = 0.0;
    double t_total_s = 0.0;
};

/// Per-device timing that enters the sensing/communication stage.
struct MvdTiming {
    double t_comm_s = 0.0;
    double t_sensing_s = 0.0;
};

namespace detail {
inline void check_positive(double v, const char* name) {
    require(std::isfinite(v) && v > 0.0, Errc::InvalidParameter,
            std::string(name) + " must be finite and > 0");
}
}  // namespace detail

inline void validate(const MvdParams& p) {
    detail::check_positive(p.sensing_time_s, "sensing_time_s");
    detail::check_positive(p.sensing_rate_pps, "sensing_rate_pps");
    detail::check_positive(p.packet_bits, "packet_bits");
    detail::check_positive(p.distance_m, "distance_m");
    detail::check_positive(p.tx_power_w, "tx_power_w");
    detail::check_positive(p.bandwidth_hz, "bandwidth_hz");
}

inline void validate(const ChannelParams& c) {
    detail::check_positive(c.pathloss_ref, "pathloss_ref");
    detail::check_positive(c.pathloss_exponent, "pathloss_exponent");
    detail::check_positive(c.noise_variance_w, "noise_variance_w");
    require(std::isfinite(c.capacity_gap) && c.capacity_gap > 1.0, Errc::InvalidParameter,
            "capacity_gap must be > 1");
    require(std::isfinite(c.rice_k_factor) && c.rice_k_factor >= 0.0, Errc::InvalidParameter,
            "rice_k_factor must be >= 0");
}

inline void validate(const ComputeParams& c) {
    detail::check_positive(c.f_mvap_hz, "f_mvap_hz");
    detail::check_positive(c.f_ecs_hz, "f_ecs_hz");
    detail::check_positive(c.complexity_cycles_per_bit, "complexity_cycles_per_bit");
    detail::check_positive(c.w_mvap_hz, "w_mvap_hz");
    detail::check_positive(c.delivery_time_s, "delivery_time_s");
}

/// Bits one MVD delivers per sensing window: packet size x window x packet rate.
inline double sensed_bits(const MvdParams& mvd) {
    return mvd.packet_bits * mvd.sensing_time_s * mvd.sensing_rate_pps;
}

/// LoS channel power gain, beta_0 * d^-exponent * |h_Rice|^2.
inline double channel_gain(const MvdParams& mvd, const ChannelParams& ch, double rice_sample) {
    return ch.pathloss_ref * std::pow(mvd.distance_m, -ch.pathloss_exponent) * rice_sample;
}

/// Achievable MVD-to-MVAP rate in bit/s under the capacity-gap Shannon form.
inline double mvd_rate(const MvdParams& mvd, double gain, const ChannelParams& ch) {
    const double snr = mvd.tx_power_w * gain / (ch.noise_variance_w * ch.capacity_gap);
    return mvd.bandwidth_hz * std::log1p(snr) / std::numbers::ln2;
}

/// Throws ZeroRate for an unreachable device; callers count that round as a violation.
inline double comm_delay(double bits, double rate) {
    require(rate > 0.0, Errc::ZeroRate, "device link rate is zero");
    return bits / rate;
}

inline double local_latency(double b_local, const ComputeParams& cp, double f_mvap_sample) {
    return cp.complexity_cycles_per_bit * b_local / f_mvap_sample;
}

/// MVAP-to-ECS rate in bit/s at the given SINR (dB).
inline double ecs_rate(double sinr_db, const ComputeParams& cp) {
    return cp.w_mvap_hz * std::log1p(std::pow(10.0, sinr_db / 10.0)) / std::numbers::ln2;
}

inline OffloadLatency offload_latency(double b_off, double sinr_db, const ComputeParams& cp,
                                      double f_ecs_sample) {
    const double rate = ecs_rate(sinr_db, cp);
    require(rate > 0.0, Errc::ZeroRate, "ECS link rate is zero");
    OffloadLatency out;
    out.t_offloading_s = b_off / rate;
    out.t_offloading_ecs_s = out.t_offloading_s + cp.complexity_cycles_per_bit * b_off / f_ecs_sample;
    return out;
}

/// End-to-end latency. The MVAP waits for the slowest device before processing;
/// local and offloaded shares then run in parallel.
inline LatencyBreakdown total_latency(std::span<const MvdTiming> per_mvd, double t_local,
                                      const OffloadLatency& offload, const ComputeParams& cp) {
    require(!per_mvd.empty(), Errc::EmptyMvdSet, "total_latency needs at least one MVD");
    LatencyBreakdown out;
    out.t_sensing_comm_s = 0.0;
    for (const auto& m : per_mvd) out.t_sensing_comm_s = std::max(out.t_sensing_comm_s, m.t_comm_s + m.t_sensing_s);
    out.t_local_s = t_local;
    out.t_offloading_s = offload.t_offloading_s;
    out.t_offloading_ecs_s = offload.t_offloading_ecs_s;
    out.t_delivery_s = cp.delivery_time_s;
    out.t_total_s = out.t_sensing_comm_s + out.t_delivery_s + std::max(t_local, offload.t_offloading_ecs_s);
    return out;
}

/// Strictest user requirement.
inline double requirement(std::span<const double> t_req) {
    require(!t_req.empty(), Errc::EmptyUserSet, "requirement needs at least one user");
    double out = t_req.front();
    for (double t : t_req) {
        require(std::isfinite(t) && t > 0.0, Errc::InvalidParameter, "user requirement must be > 0");
        out = std::min(out, t);
    }
    return out;
}

/// |h|^2 for h = sqrt(K/(K+1)) + CN(0, 1/(K+1)), i.e. a unit-mean Rician power sample.
inline double rice_power_sample(double k_factor, Rng& rng) {
    const double los = std::sqrt(k_factor / (k_factor + 1.0));
    const double scatter = std::sqrt(1.0 / (2.0 * (k_factor + 1.0)));
    const double re = los + scatter * standard_normal(rng);
    const double im = scatter * standard_normal(rng);
    return re * re + im * im;
}

}  // namespace mvap
