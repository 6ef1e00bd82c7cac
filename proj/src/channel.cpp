#include "vrmcast/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrmcast::channel {

double ChannelParams::mu_max() const { return bandwidth_hz * std::log2(1.0 + db_to_lin(sinr_cap_db)); }

double los_probability(double d) {
    if (d < 0.0) throw std::domain_error("los_probability: negative distance");
    if (d <= 5.0) return 1.0;
    if (d <= 49.0) return std::exp(-(d - 5.0) / 70.8);
    return 0.54 * std::exp(-(d - 49.0) / 211.7);
}

double pathloss(double d3d, double fc, bool is_los) {
    if (!(d3d > 0.0)) throw std::domain_error("pathloss: distance must be positive");
    if (!(fc > 0.0)) throw std::domain_error("pathloss: carrier must be positive");
    const double los = 32.4 + 17.3 * std::log10(d3d) + 20.0 * std::log10(fc);
    if (is_los) return los;
    const double nlos = 38.3 * std::log10(d3d) + 17.3 + 24.9 * std::log10(fc);
    return std::max(los, nlos);
}

double received_power(double p_w, const PathTerm& t) { return p_w * t.h_lin * t.g_tx * t.g_rx; }

double interference_power(const ChannelParams& params, const std::vector<PathTerm>& interferers) {
    const double p = params.tx_power_w();
    double sum = 0.0;
    for (const auto& t : interferers) sum += received_power(p, t);
    return sum;
}

double sinr_from_powers(double signal_w, double interference_w, double noise_w) {
    return signal_w / (interference_w + noise_w);
}

double sinr(const ChannelParams& params, const PathTerm& serving, const std::vector<PathTerm>& interferers) {
    return sinr_from_powers(received_power(params.tx_power_w(), serving), interference_power(params, interferers),
                            params.noise_power_w());
}

double unicast_rate(double s, const ChannelParams& params) {
    if (s < 0.0) throw std::domain_error("unicast_rate: negative SINR");
    const double capped = std::min(s, db_to_lin(params.sinr_cap_db));
    return params.bandwidth_hz * std::log2(1.0 + capped);
}

double multicast_rate(const std::vector<double>& rates) {
    if (rates.empty()) throw std::logic_error("multicast_rate: no members");
    return *std::min_element(rates.begin(), rates.end());
}

double azimuth_deg(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
    return std::atan2(to.y() - from.y(), to.x() - from.x()) * 180.0 / kPi;
}

double abs_angle_diff_deg(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

LinkSampler::LinkSampler(const ChannelParams& params, const Eigen::Vector3d& sbs, const Eigen::Vector3d& user,
                         int blocker_count, std::uint64_t seed, int sbs_index, int user_index)
    : params_(params), blockers_(blocker_count) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(sbs_index), static_cast<std::uint32_t>(user_index), 0x6c696e6bu};
    rng_.seed(seq);
    state_.d2d = (sbs.head<2>() - user.head<2>()).norm();
    state_.d3d = (sbs - user).norm();
}

const LinkState& LinkSampler::at_slot(std::int64_t slot, double slot_ms) {
    const double t_ms = static_cast<double>(slot) * slot_ms;
    const auto epoch = static_cast<std::int64_t>(std::ceil(t_ms / params_.blockage_ms - 1e-9));
    const auto coh = static_cast<std::int64_t>(std::ceil(t_ms / params_.coherence_ms - 1e-9));

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (epoch != epoch_) {
        epoch_ = epoch;
        const double u_los = unit(rng_);
        const double u_blk = unit(rng_);
        const double u_loss = unit(rng_);
        state_.is_los = u_los < los_probability(state_.d2d);
        state_.pathloss_db = pathloss(state_.d3d, params_.fc_ghz, state_.is_los);
        const double p_blk = std::min(1.0, blockers_ * params_.blockage_prob_per_blocker);
        state_.blockage_db =
            u_blk < p_blk ? params_.blockage_min_db + u_loss * (params_.blockage_max_db - params_.blockage_min_db)
                          : 0.0;
        coherence_ = -1;
    }
    if (coh != coherence_) {
        coherence_ = coh;
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double z = gauss(rng_);
        state_.shadow_db = z * (state_.is_los ? params_.shadow_std_los_db : params_.shadow_std_nlos_db);
    }
    return state_;
}

}  // namespace vrmcast::channel
