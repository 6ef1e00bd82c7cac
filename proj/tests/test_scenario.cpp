#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vrmcast/errors.hpp"
#include "vrmcast/scenario.hpp"

using namespace vrmcast;
using namespace vrmcast::scenario;

namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& text) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("theater geometry") {
    const auto t = build_theater({});
    CHECK(t.num_seats() == 50);
    CHECK(t.width_m == doctest::Approx(26.0));
    CHECK(t.depth_m == doctest::Approx(16.0));
    CHECK(t.seats[0].isApprox(Eigen::Vector3d(4, 4, 1)));
    CHECK(t.seats[49].isApprox(Eigen::Vector3d(22, 12, 1)));
    CHECK(t.seats[10].isApprox(Eigen::Vector3d(4, 6, 1)));
    REQUIRE(t.num_sbs() == 4);
    CHECK(t.sbs[0].isApprox(Eigen::Vector3d(0, 0, 3)));
    CHECK(t.sbs[3].isApprox(Eigen::Vector3d(26, 16, 3)));

    TheaterParams big;
    big.rows = 10;
    big.cols = 15;
    CHECK(build_theater(big).num_seats() == 150);

    TheaterParams bad;
    bad.rows = 0;
    CHECK_THROWS_AS(build_theater(bad), ConfigError);
}

TEST_CASE("slot and frame clock") {
    SimClock c;
    CHECK(c.frame_index(1) == 1);
    CHECK(c.frame_index(132) == 1);
    CHECK(c.frame_index(133) == 2);
    CHECK(c.first_slot_of_frame(1) == 1);
    CHECK(c.first_slot_of_frame(2) == 133);
    CHECK(c.last_slot_of_frame(1) == 132);
    CHECK(c.coherence_index(4) == 1);
    CHECK(c.coherence_index(5) == 2);
    CHECK(c.blockage_index(400) == 1);
    CHECK(c.blockage_index(401) == 2);
    for (std::int64_t f = 1; f < 500; ++f) {
        CHECK(c.frame_index(c.first_slot_of_frame(f)) == f);
        CHECK(c.frame_index(c.last_slot_of_frame(f)) == f);
    }
}

TEST_CASE("wrap_yaw") {
    CHECK(wrap_yaw(180.0) == doctest::Approx(-180.0));
    CHECK(wrap_yaw(-180.0) == doctest::Approx(-180.0));
    CHECK(wrap_yaw(370.0) == doctest::Approx(10.0));
    CHECK(wrap_yaw(-190.0) == doctest::Approx(170.0));
}

TEST_CASE("pose_to_fov against a brute-force sphere scan") {
    VideoCatalog cat;
    cat.num_videos = 1;
    // Oracle: a tile is in view when its centre lies in the pitch band and within the
    // cos-stretched yaw half-width, measured the long way round the circle by hand.
    auto oracle = [&](double yaw, double pitch) {
        TileSet s(cat.num_tiles());
        const double hw = std::cos(pitch * M_PI / 180.0) > 1e-12 ? std::min(180.0, 50.0 / std::cos(pitch * M_PI / 180.0)) : 180.0;
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 20; ++j) {
                const double p = 90.0 - 18.0 * i - 9.0, y = -180.0 + 18.0 * j + 9.0;
                if (p < std::max(-90.0, pitch - 50.0) - 1e-9 || p > std::min(90.0, pitch + 50.0) + 1e-9) continue;
                double d = std::abs(y - yaw);
                while (d > 360.0) d -= 360.0;
                if (d > 180.0) d = 360.0 - d;
                if (hw >= 180.0 || d <= hw + 1e-9) s.insert(i * 20 + j);
            }
        return s;
    };
    for (double pitch = -90.0; pitch <= 90.0; pitch += 7.5)
        for (double yaw = -180.0; yaw < 180.0; yaw += 11.0) CHECK(pose_to_fov({yaw, pitch, 0.0}, cat) == oracle(yaw, pitch));

    const auto front = pose_to_fov({0, 0, 0}, cat);
    CHECK(front.count() == 6 * 6);  // rows 27..-27 deg, columns within 50 deg
    CHECK(pose_to_fov({360.0, 0, 0}, cat) == front);
    CHECK(pose_to_fov({0, 90, 0}, cat).count() == 3 * 20);
}

TEST_CASE("pose trace loading") {
    SUBCASE("fills gaps by holding the last pose") {
        auto p = write_tmp("vrm_ok.csv",
                           "user_id,video_id,frame_index,yaw,pitch,roll\n"
                           "7,2,2,10,5,0\n"
                           "7,2,4,20,-5,1\n"
                           "3,1,1,0,0,0\n");
        const auto t = load_pose_traces(p);
        REQUIRE(t.size() == 2);
        const auto& u = t.at(7);
        CHECK(u.video_id == 2);
        REQUIRE(u.poses.size() == 4);
        CHECK(u.at_frame(1).yaw == 10.0);
        CHECK(u.at_frame(3).yaw == 10.0);
        CHECK(u.at_frame(4).pitch == -5.0);
        CHECK(u.at_frame(99).yaw == 20.0);
    }
    SUBCASE("errors carry line numbers") {
        auto p = write_tmp("vrm_bad.csv", "user_id,video_id,frame_index,yaw,pitch,roll\n1,1,1,0,0,0\n1,1,x,0,0,0\n");
        try {
            load_pose_traces(p);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(load_pose_traces(write_tmp("vrm_h.csv", "a,b\n")), ParseError);
        CHECK_THROWS_AS(load_pose_traces(write_tmp("vrm_p.csv", "user_id,video_id,frame_index,yaw,pitch,roll\n1,1,1,0,95,0\n")),
                        DataError);
        CHECK_THROWS_AS(
            load_pose_traces(write_tmp("vrm_v.csv", "user_id,video_id,frame_index,yaw,pitch,roll\n1,1,1,0,0,0\n1,2,2,0,0,0\n")),
            DataError);
        CHECK_THROWS_AS(
            load_pose_traces(write_tmp("vrm_o.csv", "user_id,video_id,frame_index,yaw,pitch,roll\n1,1,2,0,0,0\n1,1,2,0,0,0\n")),
            DataError);
    }
}

TEST_CASE("blockers on the seat-to-SBS segment") {
    const auto t = build_theater({});
    // seats (0,0), (1,1), (2,2) are collinear with SBS 0 at the origin
    const int s00 = 0, s11 = 11, s22 = 22, s01 = 1;
    CHECK(blocker_count(t, {s00, s11, s22}, s22, 0) == 2);
    CHECK(blocker_count(t, {s00, s11, s22}, s11, 0) == 1);
    CHECK(blocker_count(t, {s00, s11, s22}, s00, 0) == 0);
    CHECK(blocker_count(t, {s01, s22}, s22, 0) == 0);
    // behind the user does not count
    CHECK(blocker_count(t, {s00, s11, s22}, s00, 0, 0.3) == 0);
}
