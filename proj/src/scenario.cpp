#include "vrmcast/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "vrmcast/errors.hpp"

namespace vrmcast::scenario {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kAngleEps = 1e-9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view field, const char* name, int line) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw ParseError(std::string("bad ") + name + " '" + std::string(field) + "'", line);
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) throw ParseError(std::string("non-finite ") + name, line);
    }
    return value;
}

// Smallest signed angular difference a - b in degrees.
double angle_diff(double a, double b) {
    double d = std::fmod(a - b, 360.0);
    if (d < -180.0) d += 360.0;
    if (d >= 180.0) d -= 360.0;
    return d;
}

}  // namespace

TheaterLayout build_theater(const TheaterParams& p) {
    if (p.rows < 1 || p.cols < 1) throw ConfigError("theater needs at least one row and one column");
    if (!(p.seat_spacing_m > 0.0) || !(p.wall_margin_m >= 0.0))
        throw ConfigError("seat spacing must be positive and wall margin non-negative");

    TheaterLayout t;
    t.rows = p.rows;
    t.cols = p.cols;
    t.seat_spacing_m = p.seat_spacing_m;
    t.wall_margin_m = p.wall_margin_m;
    t.user_height_m = p.user_height_m;
    t.width_m = 2.0 * p.wall_margin_m + (p.cols - 1) * p.seat_spacing_m;
    t.depth_m = 2.0 * p.wall_margin_m + (p.rows - 1) * p.seat_spacing_m;

    t.seats.reserve(static_cast<std::size_t>(p.rows * p.cols));
    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c)
            t.seats.emplace_back(p.wall_margin_m + c * p.seat_spacing_m, p.wall_margin_m + r * p.seat_spacing_m,
                                 p.user_height_m);

    t.sbs = {Eigen::Vector3d(0.0, 0.0, p.sbs_height_m), Eigen::Vector3d(t.width_m, 0.0, p.sbs_height_m),
             Eigen::Vector3d(0.0, t.depth_m, p.sbs_height_m), Eigen::Vector3d(t.width_m, t.depth_m, p.sbs_height_m)};
    return t;
}

double wrap_yaw(double yaw) {
    double w = std::fmod(yaw + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    w -= 180.0;
    if (w >= 180.0) w -= 360.0;
    return w;
}

TileSet pose_to_fov(const Pose3DoF& pose, const VideoCatalog& cat) {
    TileSet out(cat.num_tiles());
    const double tile_w = 360.0 / cat.tiles_h;
    const double tile_h = 180.0 / cat.tiles_v;
    const double pitch = std::clamp(pose.pitch, -90.0, 90.0);
    const double yaw = wrap_yaw(pose.yaw);

    const double lo = std::max(-90.0, pitch - cat.fov_v_deg / 2.0);
    const double hi = std::min(90.0, pitch + cat.fov_v_deg / 2.0);

    const double c = std::cos(pitch * kDegToRad);
    double half_w = 180.0;
    if (c > 1e-12) half_w = std::min(180.0, cat.fov_h_deg / 2.0 / c);

    for (int i = 0; i < cat.tiles_v; ++i) {
        const double row_pitch = 90.0 - (i + 0.5) * tile_h;
        if (row_pitch < lo - kAngleEps || row_pitch > hi + kAngleEps) continue;
        for (int j = 0; j < cat.tiles_h; ++j) {
            const double col_yaw = -180.0 + (j + 0.5) * tile_w;
            if (half_w >= 180.0 || std::abs(angle_diff(col_yaw, yaw)) <= half_w + kAngleEps)
                out.insert(i * cat.tiles_h + j);
        }
    }
    return out;
}

std::int64_t SimClock::ceil_div(std::int64_t slot, double period_ms) const {
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(slot) * slot_ms / period_ms - 1e-9));
}

std::int64_t SimClock::first_slot_of_frame(std::int64_t frame) const {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(frame - 1) * frame_ms / slot_ms + 1e-9)) + 1;
}

const Pose3DoF& PoseTrace::at_frame(std::int64_t frame) const {
    if (poses.empty()) throw DataError("empty pose trace for user " + std::to_string(user_id));
    auto idx = std::clamp<std::int64_t>(frame - 1, 0, static_cast<std::int64_t>(poses.size()) - 1);
    return poses[static_cast<std::size_t>(idx)];
}

std::map<int, PoseTrace> load_pose_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pose trace " + path.string());

    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    ++lineno;
    {
        auto h = split_csv(line);
        static const char* expect[] = {"user_id", "video_id", "frame_index", "yaw", "pitch", "roll"};
        if (h.size() != 6) throw ParseError("header must have 6 columns", lineno);
        for (std::size_t k = 0; k < 6; ++k)
            if (h[k] != expect[k]) throw ParseError("unexpected header column '" + std::string(h[k]) + "'", lineno);
    }

    struct Row {
        std::int64_t frame;
        Pose3DoF pose;
    };
    std::map<int, std::vector<Row>> rows;
    std::map<int, int> video_of;

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(f.size()), lineno);
        const int user = parse_number<int>(f[0], "user_id", lineno);
        const int video = parse_number<int>(f[1], "video_id", lineno);
        const auto frame = parse_number<std::int64_t>(f[2], "frame_index", lineno);
        Pose3DoF p;
        p.yaw = wrap_yaw(parse_number<double>(f[3], "yaw", lineno));
        p.pitch = parse_number<double>(f[4], "pitch", lineno);
        p.roll = parse_number<double>(f[5], "roll", lineno);

        if (frame < 1) throw DataError("line " + std::to_string(lineno) + ": frame_index must be >= 1");
        if (p.pitch < -90.0 || p.pitch > 90.0)
            throw DataError("line " + std::to_string(lineno) + ": pitch outside [-90, 90]");
        auto [it, fresh] = video_of.emplace(user, video);
        if (!fresh && it->second != video)
            throw DataError("line " + std::to_string(lineno) + ": user " + std::to_string(user) + " changes video");
        auto& seq = rows[user];
        if (!seq.empty() && frame <= seq.back().frame)
            throw DataError("line " + std::to_string(lineno) + ": frame_index not increasing for user " +
                            std::to_string(user));
        seq.push_back({frame, p});
    }

    std::map<int, PoseTrace> out;
    for (auto& [user, seq] : rows) {
        PoseTrace tr;
        tr.user_id = user;
        tr.video_id = video_of[user];
        tr.poses.resize(static_cast<std::size_t>(seq.back().frame));
        std::size_t k = 0;
        Pose3DoF held = seq.front().pose;
        for (std::int64_t fr = 1; fr <= seq.back().frame; ++fr) {
            if (k < seq.size() && seq[k].frame == fr) held = seq[k++].pose;
            tr.poses[static_cast<std::size_t>(fr - 1)] = held;
        }
        out.emplace(user, std::move(tr));
    }
    return out;
}

int blocker_count(const TheaterLayout& layout, const std::vector<int>& occupied, int user_seat, int sbs,
                  double radius) {
    const Eigen::Vector2d a = layout.sbs.at(static_cast<std::size_t>(sbs)).head<2>();
    const Eigen::Vector2d b = layout.seats.at(static_cast<std::size_t>(user_seat)).head<2>();
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();

    int count = 0;
    for (int s : occupied) {
        if (s == user_seat) continue;
        const Eigen::Vector2d p = layout.seats.at(static_cast<std::size_t>(s)).head<2>();
        double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        if ((a + t * ab - p).norm() <= radius) ++count;
    }
    return count;
}

}  // namespace vrmcast::scenario
