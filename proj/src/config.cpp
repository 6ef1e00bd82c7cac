#include "vrmcast/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vrmcast/errors.hpp"

namespace vrmcast {

namespace {

template <class C, class F>
void visit_fields(C& c, F&& f) {
    f("theater_rows", c.theater_rows);
    f("theater_cols", c.theater_cols);
    f("seat_spacing_m", c.seat_spacing_m);
    f("wall_margin_m", c.wall_margin_m);
    f("sbs_height_m", c.sbs_height_m);
    f("user_height_m", c.user_height_m);
    f("num_videos", c.num_videos);
    f("users_per_video", c.users_per_video);
    f("clusters_per_video", c.clusters_per_video);
    f("frames_per_video", c.frames_per_video);
    f("frame_period_ms", c.frame_period_ms);
    f("tiles_h", c.tiles_h);
    f("tiles_v", c.tiles_v);
    f("fov_h_deg", c.fov_h_deg);
    f("fov_v_deg", c.fov_v_deg);
    f("chunk_mb", c.chunk_mb);
    f("slot_ms", c.slot_ms);
    f("coherence_ms", c.coherence_ms);
    f("blockage_ms", c.blockage_ms);
    f("sim_time_ms", c.sim_time_ms);
    f("fc_ghz", c.fc_ghz);
    f("bandwidth_ghz", c.bandwidth_ghz);
    f("noise_dbm_hz", c.noise_dbm_hz);
    f("noise_figure_db", c.noise_figure_db);
    f("tx_power_dbm", c.tx_power_dbm);
    f("shadow_std_los_db", c.shadow_std_los_db);
    f("shadow_std_nlos_db", c.shadow_std_nlos_db);
    f("blockage_min_db", c.blockage_min_db);
    f("blockage_max_db", c.blockage_max_db);
    f("blockage_prob_per_blocker", c.blockage_prob_per_blocker);
    f("blocker_radius_m", c.blocker_radius_m);
    f("sidelobe_gain", c.sidelobe_gain);
    f("sinr_cap_db", c.sinr_cap_db);
    f("rx_beamwidth_deg", c.rx_beamwidth_deg);
    f("tx_beamwidths_deg", c.tx_beamwidths_deg);
    f("rf_chains_per_sbs", c.rf_chains_per_sbs);
    f("rf_chains_per_hmd", c.rf_chains_per_hmd);
    f("v_delta", c.v_delta);
    f("epsilon_d", c.epsilon_d);
    f("tau_mtp_ms", c.tau_mtp_ms);
    f("nu1", c.nu1);
    f("nu2", c.nu2);
    f("d2d_min_m", c.d2d_min_m);
    f("predictor", c.predictor);
    f("weights_path", c.weights_path);
    f("horizon_frames", c.horizon_frames);
    f("input_frames", c.input_frames);
    f("cutoff", c.cutoff);
    f("target_jaccard", c.target_jaccard);
    f("pose_trace_path", c.pose_trace_path);
    f("pose_theta", c.pose_theta);
    f("pose_sigma_deg", c.pose_sigma_deg);
    f("pitch_sigma_deg", c.pitch_sigma_deg);
    f("attractor_sigma_deg", c.attractor_sigma_deg);
    f("scheme", c.scheme);
    f("seed", c.seed);
    f("check_invariants", c.check_invariants);
}

[[noreturn]] void type_error(const std::string& key, const char* want) {
    throw ConfigError("config key '" + key + "' must be " + want);
}

void assign(const std::string& key, const nlohmann::json& v, int& out) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) type_error(key, "a 32-bit integer");
    out = static_cast<int>(x);
}
void assign(const std::string& key, const nlohmann::json& v, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        type_error(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
}
void assign(const std::string& key, const nlohmann::json& v, double& out) {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
}
void assign(const std::string& key, const nlohmann::json& v, bool& out) {
    if (!v.is_boolean()) type_error(key, "a boolean");
    out = v.get<bool>();
}
void assign(const std::string& key, const nlohmann::json& v, std::string& out) {
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
}
void assign(const std::string& key, const nlohmann::json& v, std::optional<double>& out) {
    if (v.is_null()) {
        out.reset();
        return;
    }
    if (!v.is_number()) type_error(key, "a number or null");
    out = v.get<double>();
}
void assign(const std::string& key, const nlohmann::json& v, std::vector<double>& out) {
    if (!v.is_array()) type_error(key, "an array of numbers");
    std::vector<double> tmp;
    for (const auto& e : v) {
        if (!e.is_number()) type_error(key, "an array of numbers");
        tmp.push_back(e.get<double>());
    }
    out = std::move(tmp);
}

template <class T>
nlohmann::ordered_json emit(const T& v) {
    return nlohmann::ordered_json(v);
}
nlohmann::ordered_json emit(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::UREAC: return "UREAC";
        case Scheme::MREAC: return "MREAC";
        case Scheme::MPROAC: return "MPROAC";
        case Scheme::MPROAC_PLUS: return "MPROAC+";
    }
    return "?";
}

Scheme parse_scheme(const std::string& name) {
    for (Scheme s : all_schemes())
        if (name == scheme_name(s)) return s;
    if (name == "MPROAC_PLUS" || name == "MPROACplus") return Scheme::MPROAC_PLUS;
    throw ConfigError("unknown scheme '" + name + "' (expected UREAC, MREAC, MPROAC or MPROAC+)");
}

const std::vector<Scheme>& all_schemes() {
    static const std::vector<Scheme> v{Scheme::UREAC, Scheme::MREAC, Scheme::MPROAC, Scheme::MPROAC_PLUS};
    return v;
}

double SimConfig::effective_target_jaccard() const {
    if (target_jaccard) return *target_jaccard;
    if (horizon_frames == 0) return 1.0;
    static const std::map<int, double> table{{5, 0.70}, {10, 0.66}, {20, 0.62}, {30, 0.57}};
    auto it = table.find(horizon_frames);
    if (it == table.end())
        throw ConfigError("no default target Jaccard for horizon_frames=" + std::to_string(horizon_frames) +
                          "; set target_jaccard");
    return it->second;
}

scenario::TheaterParams SimConfig::theater() const {
    return {theater_rows, theater_cols, seat_spacing_m, wall_margin_m, sbs_height_m, user_height_m};
}

scenario::VideoCatalog SimConfig::catalog() const {
    scenario::VideoCatalog v;
    v.num_videos = num_videos;
    v.frames_per_video = frames_per_video;
    v.frame_period_ms = frame_period_ms;
    v.tiles_h = tiles_h;
    v.tiles_v = tiles_v;
    v.chunk_bits = chunk_bits();
    v.fov_h_deg = fov_h_deg;
    v.fov_v_deg = fov_v_deg;
    return v;
}

scenario::SimClock SimConfig::clock() const { return {slot_ms, frame_period_ms, coherence_ms, blockage_ms}; }

channel::ChannelParams SimConfig::channel() const {
    channel::ChannelParams p;
    p.fc_ghz = fc_ghz;
    p.bandwidth_hz = bandwidth_ghz * 1e9;
    p.noise_dbm_per_hz = noise_dbm_hz;
    p.noise_figure_db = noise_figure_db;
    p.tx_power_dbm = tx_power_dbm;
    p.shadow_std_los_db = shadow_std_los_db;
    p.shadow_std_nlos_db = shadow_std_nlos_db;
    p.blockage_min_db = blockage_min_db;
    p.blockage_max_db = blockage_max_db;
    p.blockage_prob_per_blocker = blockage_prob_per_blocker;
    p.coherence_ms = coherence_ms;
    p.blockage_ms = blockage_ms;
    p.sidelobe_gain = sidelobe_gain;
    p.sinr_cap_db = sinr_cap_db;
    p.rx_beamwidth_deg = rx_beamwidth_deg;
    p.tx_beamwidths_deg = tx_beamwidths_deg;
    p.rf_chains_per_sbs = rf_chains_per_sbs;
    return p;
}

lyapunov::LyapunovParams SimConfig::lyapunov() const {
    lyapunov::LyapunovParams p;
    p.v_delta = v_delta;
    p.epsilon = epsilon_d;
    p.tau_mtp_ms = tau_mtp_ms;
    // One real frame plus one predicted cluster frame, each at most the whole grid.
    p.a_max = 2.0 * tiles_h * tiles_v * chunk_bits();
    return p;
}

void SimConfig::validate() const {
    require(theater_rows >= 1, "theater_rows", "must be >= 1");
    require(theater_cols >= 1, "theater_cols", "must be >= 1");
    require(seat_spacing_m > 0, "seat_spacing_m", "must be > 0");
    require(wall_margin_m >= 0, "wall_margin_m", "must be >= 0");
    require(sbs_height_m > user_height_m, "sbs_height_m", "must exceed user_height_m");
    require(num_videos >= 1, "num_videos", "must be >= 1");
    require(users_per_video >= 0, "users_per_video", "must be >= 0");
    require(num_users() <= theater_rows * theater_cols, "users_per_video", "more users than seats");
    require(clusters_per_video >= 1, "clusters_per_video", "must be >= 1");
    require(users_per_video == 0 || clusters_per_video <= users_per_video, "clusters_per_video",
            "must not exceed users_per_video");
    require(frames_per_video >= 1, "frames_per_video", "must be >= 1");
    require(frame_period_ms > 0, "frame_period_ms", "must be > 0");
    require(tiles_h >= 1 && tiles_v >= 1 && tiles_h * tiles_v <= kMaxTiles, "tiles_h",
            "grid must have between 1 and " + std::to_string(kMaxTiles) + " tiles");
    require(fov_h_deg > 0 && fov_h_deg <= 360, "fov_h_deg", "must lie in (0, 360]");
    require(fov_v_deg > 0 && fov_v_deg <= 180, "fov_v_deg", "must lie in (0, 180]");
    require(chunk_mb > 0, "chunk_mb", "must be > 0");
    require(slot_ms > 0, "slot_ms", "must be > 0");
    require(frame_period_ms >= slot_ms, "frame_period_ms", "must be >= slot_ms");
    require(coherence_ms >= slot_ms, "coherence_ms", "must be >= slot_ms");
    require(blockage_ms >= coherence_ms, "blockage_ms", "must be >= coherence_ms");
    require(sim_time_ms >= 0, "sim_time_ms", "must be >= 0");
    require(fc_ghz > 0, "fc_ghz", "must be > 0");
    require(bandwidth_ghz > 0, "bandwidth_ghz", "must be > 0");
    require(shadow_std_los_db >= 0, "shadow_std_los_db", "must be >= 0");
    require(shadow_std_nlos_db >= 0, "shadow_std_nlos_db", "must be >= 0");
    require(blockage_min_db >= 0 && blockage_min_db <= blockage_max_db, "blockage_min_db",
            "must satisfy 0 <= min <= blockage_max_db");
    require(blockage_prob_per_blocker >= 0 && blockage_prob_per_blocker <= 1, "blockage_prob_per_blocker",
            "must lie in [0, 1]");
    require(blocker_radius_m >= 0, "blocker_radius_m", "must be >= 0");
    require(sidelobe_gain >= 0 && sidelobe_gain < 1, "sidelobe_gain", "must lie in [0, 1)");
    require(rx_beamwidth_deg > 0 && rx_beamwidth_deg <= 360, "rx_beamwidth_deg", "must lie in (0, 360]");
    require(!tx_beamwidths_deg.empty(), "tx_beamwidths_deg", "must not be empty");
    for (double w : tx_beamwidths_deg) require(w > 0 && w <= 360, "tx_beamwidths_deg", "entries must lie in (0, 360]");
    require(rf_chains_per_sbs >= 1, "rf_chains_per_sbs", "must be >= 1");
    require(rf_chains_per_hmd == 1, "rf_chains_per_hmd", "only a single HMD RF chain is modelled");
    require(v_delta > 0, "v_delta", "must be > 0");
    require(epsilon_d > 0 && epsilon_d < 1, "epsilon_d", "must lie in (0, 1)");
    require(tau_mtp_ms > 0, "tau_mtp_ms", "must be > 0");
    require(nu1 >= 0 && nu1 <= 1, "nu1", "must lie in [0, 1]");
    require(nu2 >= 1, "nu2", "must be >= 1");
    require(d2d_min_m > 0, "d2d_min_m", "must be > 0");
    require(predictor == "synthetic" || predictor == "gru", "predictor", "must be 'synthetic' or 'gru'");
    require(predictor != "gru" || !weights_path.empty(), "weights_path", "required when predictor is 'gru'");
    require(horizon_frames >= 0, "horizon_frames", "must be >= 0");
    require(input_frames >= 1, "input_frames", "must be >= 1");
    require(cutoff > 0 && cutoff < 1, "cutoff", "must lie in (0, 1)");
    require(!target_jaccard || (*target_jaccard > 0 && *target_jaccard <= 1), "target_jaccard",
            "must lie in (0, 1]");
    if (predictor == "synthetic") (void)effective_target_jaccard();
    require(pose_theta >= 0 && pose_theta <= 1, "pose_theta", "must lie in [0, 1]");
    require(pose_sigma_deg >= 0, "pose_sigma_deg", "must be >= 0");
    require(pitch_sigma_deg >= 0, "pitch_sigma_deg", "must be >= 0");
    require(attractor_sigma_deg >= 0, "attractor_sigma_deg", "must be >= 0");
    (void)parse_scheme(scheme);
}

nlohmann::ordered_json to_json(const SimConfig& c) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    visit_fields(c, [&](const char* key, const auto& v) { j[key] = emit(v); });
    return j;
}

SimConfig apply_json(SimConfig base, const nlohmann::json& j) {
    if (j.is_null()) return base;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        visit_fields(base, [&](const char* key, auto& field) {
            if (it.key() == key) {
                assign(it.key(), it.value(), field);
                known = true;
            }
        });
        if (!known) throw ConfigError("unknown config key '" + it.key() + "'");
    }
    return base;
}

SimConfig apply_override(SimConfig base, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    return apply_json(std::move(base), nlohmann::json{{key, value}});
}

SimConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    return parse_config(SimConfig{}, path, overrides);
}

SimConfig parse_config(SimConfig c, const std::string& path, const std::vector<std::string>& overrides) {
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            c = apply_json(c, j);
        }
    }
    for (const auto& o : overrides) c = apply_override(c, o);
    c.validate();
    return c;
}

std::vector<std::string> preset_names() {
    return {"sT-1v", "sT-3v", "sT-5v", "bT-1v", "bT-3v", "bT-5v", "bT-10v"};
}

SimConfig preset(const std::string& name) {
    SimConfig c;
    int videos = 0;
    if (name.size() > 4 && name.compare(0, 3, "sT-") == 0) {
        c.theater_rows = 5;
        c.theater_cols = 10;
        c.users_per_video = 10;
    } else if (name.size() > 4 && name.compare(0, 3, "bT-") == 0) {
        c.theater_rows = 10;
        c.theater_cols = 15;
        c.users_per_video = 15;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    const std::string tail = name.substr(3);
    if (tail.back() != 'v') throw ConfigError("unknown preset '" + name + "'");
    try {
        videos = std::stoi(tail.substr(0, tail.size() - 1));
    } catch (const std::exception&) {
        throw ConfigError("unknown preset '" + name + "'");
    }
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) throw ConfigError("unknown preset '" + name + "'");
    c.num_videos = videos;
    c.clusters_per_video = 2;
    c.validate();
    return c;
}

}  // namespace vrmcast
