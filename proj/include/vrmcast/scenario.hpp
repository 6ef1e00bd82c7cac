#ifndef VRMCAST_SCENARIO_HPP
#define VRMCAST_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "vrmcast/tileset.hpp"

namespace vrmcast::scenario {

struct TheaterParams {
    int rows = 5;
    int cols = 10;
    double seat_spacing_m = 2.0;
    double wall_margin_m = 4.0;
    double sbs_height_m = 3.0;
    double user_height_m = 1.0;
};

/// Seat grid plus the four ceiling-corner small cells. Positions are in metres,
/// x along the columns, y along the rows, z up.
struct TheaterLayout {
    int rows = 0;
    int cols = 0;
    double seat_spacing_m = 0.0;
    double wall_margin_m = 0.0;
    double width_m = 0.0;
    double depth_m = 0.0;
    double user_height_m = 0.0;
    std::vector<Eigen::Vector3d> seats;  // row-major
    std::vector<Eigen::Vector3d> sbs;    // exactly 4

    int num_seats() const { return rows * cols; }
    int num_sbs() const { return static_cast<int>(sbs.size()); }
    const Eigen::Vector3d& seat(int row, int col) const { return seats[static_cast<std::size_t>(row * cols + col)]; }
};

TheaterLayout build_theater(const TheaterParams& params);

struct VideoCatalog {
    int num_videos = 1;
    int frames_per_video = 1800;
    double frame_period_ms = 33.0;
    int tiles_h = 20;
    int tiles_v = 10;
    double chunk_bits = 0.972e6;
    double fov_h_deg = 100.0;
    double fov_v_deg = 100.0;

    int num_tiles() const { return tiles_h * tiles_v; }
};

/// Head orientation in degrees. Yaw wraps into [-180, 180).
struct Pose3DoF {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
};

double wrap_yaw(double yaw_deg);

/// Tiles (row-major, row 0 at the top / +90 pitch) whose EQR centres fall inside the
/// viewport window around (yaw, pitch). Roll does not affect the result.
TileSet pose_to_fov(const Pose3DoF& pose, const VideoCatalog& catalog);

/// Slot/frame/epoch bookkeeping. Slots are 1-based: slot t covers ((t-1)T_t, t T_t].
struct SimClock {
    double slot_ms = 0.25;
    double frame_ms = 33.0;
    double coherence_ms = 1.0;
    double blockage_ms = 100.0;

    std::int64_t frame_index(std::int64_t slot) const { return ceil_div(slot, frame_ms); }
    std::int64_t blockage_index(std::int64_t slot) const { return ceil_div(slot, blockage_ms); }
    std::int64_t coherence_index(std::int64_t slot) const { return ceil_div(slot, coherence_ms); }
    double slot_end_ms(std::int64_t slot) const { return static_cast<double>(slot) * slot_ms; }
    /// First slot whose frame index equals `frame`.
    std::int64_t first_slot_of_frame(std::int64_t frame) const;
    std::int64_t last_slot_of_frame(std::int64_t frame) const { return first_slot_of_frame(frame + 1) - 1; }

private:
    std::int64_t ceil_div(std::int64_t slot, double period_ms) const;
};

/// One user's dense per-frame trace. poses[0] is frame 1.
struct PoseTrace {
    int user_id = 0;
    int video_id = 0;
    std::vector<Pose3DoF> poses;

    const Pose3DoF& at_frame(std::int64_t frame) const;
};

/// Reads `user_id,video_id,frame_index,yaw,pitch,roll` rows (header required).
/// Gaps hold the previous pose; frames before a user's first row take its first pose.
std::map<int, PoseTrace> load_pose_traces(const std::filesystem::path& path);

inline constexpr double kBlockerRadiusM = 0.3;

/// Occupied seats (other than `user_seat`) whose head disc crosses the azimuth-plane
/// segment from SBS `sbs` to the user.
int blocker_count(const TheaterLayout& layout, const std::vector<int>& occupied_seats, int user_seat, int sbs,
                  double blocker_radius_m = kBlockerRadiusM);

}  // namespace vrmcast::scenario

#endif  // VRMCAST_SCENARIO_HPP
