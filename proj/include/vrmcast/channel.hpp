#ifndef VRMCAST_CHANNEL_HPP
#define VRMCAST_CHANNEL_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace vrmcast::channel {

inline constexpr double kPi = 3.14159265358979323846;

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

struct ChannelParams {
    double fc_ghz = 28.0;
    double bandwidth_hz = 0.85e9;
    double noise_dbm_per_hz = -174.0;
    double noise_figure_db = 9.0;
    double tx_power_dbm = 15.0;
    double shadow_std_los_db = 3.0;
    double shadow_std_nlos_db = 8.03;
    double blockage_min_db = 20.0;
    double blockage_max_db = 30.0;
    double blockage_prob_per_blocker = 0.05;
    double coherence_ms = 1.0;
    double blockage_ms = 100.0;
    double sidelobe_gain = 0.05;
    double sinr_cap_db = 30.0;
    double rx_beamwidth_deg = 5.0;
    std::vector<double> tx_beamwidths_deg{5, 10, 15, 20, 25, 30, 35, 40, 45};
    int rf_chains_per_sbs = 4;

    double tx_power_w() const { return dbm_to_watt(tx_power_dbm); }
    /// Thermal noise over the band with the noise figure folded into N0.
    double noise_power_w() const { return dbm_to_watt(noise_dbm_per_hz + noise_figure_db) * bandwidth_hz; }
    /// Rate at the SINR cap.
    double mu_max() const;
};

/// LOS probability for an indoor-hotspot link of 2D length d (metres).
double los_probability(double d2d);

/// Pathloss in dB; NLOS is never below LOS at equal geometry.
double pathloss(double d3d, double fc_ghz, bool is_los);

/// 2D sectored pattern: flat mainlobe of width `beamwidth` (rad), flat sidelobe `g_sl`.
template <class Scalar>
Scalar antenna_gain(Scalar beamwidth, Scalar deviation, Scalar g_sl) {
    using std::abs;
    if (!(beamwidth > Scalar(0)) || beamwidth > Scalar(2 * kPi) + Scalar(1e-12))
        throw std::domain_error("antenna_gain: beamwidth must lie in (0, 2pi]");
    if (abs(deviation) <= beamwidth / Scalar(2))
        return (Scalar(2 * kPi) - (Scalar(2 * kPi) - beamwidth) * g_sl) / beamwidth;
    return g_sl;
}

struct LinkState {
    bool is_los = true;
    double pathloss_db = 0.0;
    double shadow_db = 0.0;
    double blockage_db = 0.0;
    double d2d = 0.0;
    double d3d = 0.0;

    double gain_db() const { return pathloss_db + shadow_db + blockage_db; }
    double gain_lin() const { return std::pow(10.0, -gain_db() / 10.0); }
};

/// One transmitter's contribution at a receiver: channel gain and both antenna gains (linear).
struct PathTerm {
    double h_lin = 0.0;
    double g_tx = 1.0;
    double g_rx = 1.0;
};

double received_power(double p_w, const PathTerm& t);
double interference_power(const ChannelParams& params, const std::vector<PathTerm>& interferers);
double sinr(const ChannelParams& params, const PathTerm& serving, const std::vector<PathTerm>& interferers);
double sinr_from_powers(double signal_w, double interference_w, double noise_w);

/// BW log2(1 + SINR), capped at mu_max.
double unicast_rate(double sinr, const ChannelParams& params);
/// Rate decodable by every listed member.
double multicast_rate(const std::vector<double>& member_rates);

/// Azimuth (degrees, atan2 convention) of `to` seen from `from`.
double azimuth_deg(const Eigen::Vector3d& from, const Eigen::Vector3d& to);
/// |a - b| folded into [0, 180].
double abs_angle_diff_deg(double a, double b);

/// Link between one SBS and one user with its own RNG stream. LOS state and blockage are
/// held per blockage epoch, shadowing per coherence interval.
class LinkSampler {
public:
    LinkSampler(const ChannelParams& params, const Eigen::Vector3d& sbs, const Eigen::Vector3d& user,
                int blocker_count, std::uint64_t seed, int sbs_index, int user_index);

    /// State for the given 1-based slot. Calls must use non-decreasing slots.
    const LinkState& at_slot(std::int64_t slot, double slot_ms);
    const LinkState& state() const { return state_; }
    int blocker_count() const { return blockers_; }

private:
    ChannelParams params_;
    int blockers_;
    std::mt19937_64 rng_;
    LinkState state_;
    std::int64_t epoch_ = -1;
    std::int64_t coherence_ = -1;
};

}  // namespace vrmcast::channel

#endif  // VRMCAST_CHANNEL_HPP
