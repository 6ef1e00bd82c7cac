#ifndef VRMCAST_CONFIG_HPP
#define VRMCAST_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vrmcast/channel.hpp"
#include "vrmcast/lyapunov.hpp"
#include "vrmcast/scenario.hpp"

namespace vrmcast {

enum class Scheme { UREAC, MREAC, MPROAC, MPROAC_PLUS };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);  // throws ConfigError
const std::vector<Scheme>& all_schemes();

struct SimConfig {
    // theater and catalog
    int theater_rows = 5;
    int theater_cols = 10;
    double seat_spacing_m = 2.0;
    double wall_margin_m = 4.0;
    double sbs_height_m = 3.0;
    double user_height_m = 1.0;
    int num_videos = 1;
    int users_per_video = 10;
    int clusters_per_video = 2;
    int frames_per_video = 1800;
    double frame_period_ms = 33.0;
    int tiles_h = 20;
    int tiles_v = 10;
    double fov_h_deg = 100.0;
    double fov_v_deg = 100.0;
    double chunk_mb = 0.972;

    // time
    double slot_ms = 0.25;
    double coherence_ms = 1.0;
    double blockage_ms = 100.0;
    double sim_time_ms = 60000.0;

    // channel
    double fc_ghz = 28.0;
    double bandwidth_ghz = 0.85;
    double noise_dbm_hz = -174.0;
    double noise_figure_db = 9.0;
    double tx_power_dbm = 15.0;
    double shadow_std_los_db = 3.0;
    double shadow_std_nlos_db = 8.03;
    double blockage_min_db = 20.0;
    double blockage_max_db = 30.0;
    double blockage_prob_per_blocker = 0.05;
    double blocker_radius_m = 0.3;
    double sidelobe_gain = 0.05;
    double sinr_cap_db = 30.0;
    double rx_beamwidth_deg = 5.0;
    std::vector<double> tx_beamwidths_deg{5, 10, 15, 20, 25, 30, 35, 40, 45};
    int rf_chains_per_sbs = 4;
    int rf_chains_per_hmd = 1;

    // control
    double v_delta = 1e8;
    double epsilon_d = 0.01;
    double tau_mtp_ms = 10.0;
    double nu1 = 0.5;
    int nu2 = 10;
    double d2d_min_m = 2.0;

    // prediction
    std::string predictor = "synthetic";  // synthetic | gru
    std::string weights_path;
    int horizon_frames = 5;
    int input_frames = 30;
    double cutoff = 0.5;
    std::optional<double> target_jaccard;

    // head motion
    std::string pose_trace_path;
    double pose_theta = 0.05;
    double pose_sigma_deg = 2.0;
    double pitch_sigma_deg = 1.0;
    double attractor_sigma_deg = 1.5;

    // run
    std::string scheme = "MPROAC+";
    std::uint64_t seed = 1;
    bool check_invariants = true;

    int num_users() const { return num_videos * users_per_video; }
    int total_clusters() const { return num_videos * clusters_per_video; }
    double chunk_bits() const { return chunk_mb * 1e6; }
    /// Jaccard the synthetic predictor aims for at this horizon.
    double effective_target_jaccard() const;

    scenario::TheaterParams theater() const;
    scenario::VideoCatalog catalog() const;
    scenario::SimClock clock() const;
    channel::ChannelParams channel() const;
    lyapunov::LyapunovParams lyapunov() const;

    /// Throws ConfigError naming the first offending key.
    void validate() const;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

nlohmann::ordered_json to_json(const SimConfig& c);
/// Applies the keys of `j` on top of `base`. Unknown keys and type errors are ConfigErrors.
SimConfig apply_json(SimConfig base, const nlohmann::json& j);
/// Reads a JSON file (an empty file means all defaults), then applies `key=value` overrides.
SimConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});
/// Same, starting from `base` instead of the defaults.
SimConfig parse_config(SimConfig base, const std::string& path, const std::vector<std::string>& overrides = {});
/// Applies one `key=value` override; the value is read as JSON when it parses, else as a string.
SimConfig apply_override(SimConfig base, const std::string& assignment);

std::vector<std::string> preset_names();
SimConfig preset(const std::string& name);

}  // namespace vrmcast

#endif  // VRMCAST_CONFIG_HPP
