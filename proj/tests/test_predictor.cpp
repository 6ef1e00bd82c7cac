#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vrmcast/predictor.hpp"
#include "vrmcast/scenario.hpp"

using namespace vrmcast;
using namespace vrmcast::predictor;

namespace {

using V = std::vector<double>;
using M = std::vector<V>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

V matvec(const Mat<double>& m, const V& x) {
    V y(static_cast<std::size_t>(m.rows()), 0.0);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) y[static_cast<std::size_t>(r)] += m(r, c) * x[static_cast<std::size_t>(c)];
    return y;
}

// Scalar-loop GRU cell written from the gate equations.
V ref_step(const V& x, const V& h, const GruLayerWeights<double>& w) {
    const auto wgx = matvec(w.W_g, x), zgh = matvec(w.Z_g, h);
    const auto wrx = matvec(w.W_r, x), zrh = matvec(w.Z_r, h);
    const std::size_t n = h.size();
    V g(n), r(n), rh(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = sig(wgx[i] + zgh[i] + w.b_g(static_cast<Eigen::Index>(i)));
        r[i] = sig(wrx[i] + zrh[i] + w.b_r(static_cast<Eigen::Index>(i)));
        rh[i] = r[i] * h[i];
    }
    const auto wx = matvec(w.W, x), zh = matvec(w.Z, rh);
    for (std::size_t i = 0; i < n; ++i) {
        const double cand = std::tanh(wx[i] + zh[i] + w.b_h(static_cast<Eigen::Index>(i)));
        out[i] = (1.0 - g[i]) * h[i] + g[i] * cand;
    }
    return out;
}

V ref_logits(const PredictorModel& m, const std::vector<V>& seq) {
    V h1(static_cast<std::size_t>(m.hidden()), 0.0), h2 = h1;
    for (const auto& x : seq) {
        h1 = ref_step(x, h1, m.layers[0]);
        V a = h1;
        for (double& v : a) v = std::max(v, 0.0);
        h2 = ref_step(a, h2, m.layers[1]);
    }
    V y = matvec(m.W_d, h2);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sig(y[i] + m.b_d(static_cast<Eigen::Index>(i)));
    return y;
}

struct Bytes {
    std::string s;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double d) {
        char b[8];
        std::memcpy(b, &d, 8);  // host is little-endian
        s.append(b, 8);
    }
};

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("GRU cell and stack match the scalar reference") {
    const auto m = random_model(6, 12, 5, 5, 11, 1.5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<V> seq(5, V(3));
        Mat<double> s(5, 3);
        for (int t = 0; t < 5; ++t)
            for (int k = 0; k < 3; ++k) s(t, k) = seq[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = u(rng);
        const auto got = m.logits(s);
        const auto want = ref_logits(m, seq);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got(static_cast<Eigen::Index>(i)) - want[i]) < 1e-12);
    }
    Vec<double> x(4), h(6);
    CHECK_THROWS_AS(gru_step<double>(x, h, m.layers[0]), std::invalid_argument);
    Mat<double> wrong(4, 3);
    CHECK_THROWS_AS(m.logits(wrong), std::invalid_argument);
}

TEST_CASE("float instantiation tracks double") {
    const auto m = random_model(4, 8, 3, 5, 5);
    GruModel<float> f;
    for (int l = 0; l < 2; ++l) {
        const auto& a = m.layers[static_cast<std::size_t>(l)];
        auto& b = f.layers[static_cast<std::size_t>(l)];
        b.W_g = a.W_g.cast<float>(); b.Z_g = a.Z_g.cast<float>(); b.b_g = a.b_g.cast<float>();
        b.W_r = a.W_r.cast<float>(); b.Z_r = a.Z_r.cast<float>(); b.b_r = a.b_r.cast<float>();
        b.W = a.W.cast<float>(); b.Z = a.Z.cast<float>(); b.b_h = a.b_h.cast<float>();
    }
    f.W_d = m.W_d.cast<float>();
    f.b_d = m.b_d.cast<float>();
    f.input_len = 3;
    Mat<double> s = Mat<double>::Random(3, 3);
    const Mat<float> sf = s.cast<float>();
    CHECK((m.logits(s).cast<float>() - f.logits(sf)).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("forward thresholds at the cutoff") {
    auto m = random_model(4, 200, 3, 5, 9);
    m.layers[1].W_g.setZero();
    m.W_d.setZero();
    // with a zero dense weight the logits are sigmoid(b_d)
    for (int n = 0; n < 200; ++n) m.b_d(n) = n % 2 ? 0.1 : -0.1;
    const std::vector<scenario::Pose3DoF> poses(3);
    const auto r = m.forward(poses);
    CHECK(r.tiles.count() == 100);
    CHECK(r.tiles.contains(1));
    CHECK(!r.tiles.contains(0));
    m.cutoff = 0.99;
    CHECK(m.forward(poses).tiles.empty());
}

TEST_CASE("weight file: hand-built bytes load") {
    // hidden 1, 2 tiles, every weight distinct so ordering mistakes show up
    Bytes b;
    b.s = "GRUFOV1\n";
    for (std::uint32_t v : {2u, 3u, 1u, 2u, 4u, 5u}) b.u32(v);
    b.f64(0.25);
    double next = 0.5;
    for (int l = 0; l < 2; ++l) {
        const int in = l == 0 ? 3 : 1;
        for (int gate = 0; gate < 3; ++gate) {
            for (int k = 0; k < in; ++k) b.f64(next += 1);
            b.f64(next += 1);  // Z
            b.f64(next += 1);  // b
        }
    }
    b.f64(-1.0);
    b.f64(-2.0);
    b.f64(3.0);
    b.f64(4.0);
    std::ofstream(tmp("vrm_hand.bin"), std::ios::binary) << b.s;

    const auto m = load_weights(tmp("vrm_hand.bin"));
    CHECK(m.input_len == 4);
    CHECK(m.horizon == 5);
    CHECK(m.cutoff == 0.25);
    CHECK(m.hidden() == 1);
    CHECK(m.layers[0].W_g(0, 0) == 1.5);
    CHECK(m.layers[0].W_g(0, 2) == 3.5);
    CHECK(m.layers[0].Z_g(0, 0) == 4.5);
    CHECK(m.layers[0].b_g(0) == 5.5);
    CHECK(m.layers[0].W_r(0, 0) == 6.5);
    CHECK(m.layers[0].b_h(0) == 15.5);
    CHECK(m.layers[1].W_g(0, 0) == 16.5);
    CHECK(m.layers[1].b_h(0) == 24.5);
    CHECK(m.W_d(0, 0) == -1.0);
    CHECK(m.W_d(1, 0) == -2.0);
    CHECK(m.b_d(1) == 4.0);

    SUBCASE("corruptions are rejected") {
        auto write = [](const std::string& s) {
            std::ofstream(tmp("vrm_bad.bin"), std::ios::binary | std::ios::trunc) << s;
            return tmp("vrm_bad.bin");
        };
        CHECK_THROWS_AS(load_weights(write(b.s.substr(0, b.s.size() - 1))), std::runtime_error);
        CHECK_THROWS_AS(load_weights(write(b.s + "x")), std::runtime_error);
        std::string magic = b.s;
        magic[3] = 'X';
        CHECK_THROWS_AS(load_weights(write(magic)), std::runtime_error);
        std::string layers = b.s;
        layers[8] = 3;
        CHECK_THROWS_AS(load_weights(write(layers)), std::runtime_error);
        std::string input = b.s;
        input[12] = 4;
        CHECK_THROWS_AS(load_weights(write(input)), std::runtime_error);
        std::string nan = b.s;
        const double q = std::nan("");
        std::memcpy(nan.data() + nan.size() - 8, &q, 8);
        CHECK_THROWS_AS(load_weights(write(nan)), std::runtime_error);
        CHECK_THROWS_AS(load_weights(tmp("vrm_missing_file.bin")), std::runtime_error);
    }
}

TEST_CASE("weight file round trip") {
    const auto m = random_model(8, 200, 30, 10, 21);
    save_weights(m, tmp("vrm_rt.bin"));
    const auto r = load_weights(tmp("vrm_rt.bin"));
    CHECK(r.input_len == 30);
    CHECK(r.horizon == 10);
    CHECK(r.W_d == m.W_d);
    CHECK(r.layers[1].Z == m.layers[1].Z);
    Mat<double> s = Mat<double>::Random(30, 3);
    CHECK(r.logits(s) == m.logits(s));
}

TEST_CASE("synthetic predictor") {
    scenario::VideoCatalog cat;
    const auto truth = scenario::pose_to_fov({30, 10, 0}, cat);
    std::mt19937_64 rng(1);
    CHECK(synthetic_predict(truth, 1.0, 20, rng) == truth);
    CHECK_THROWS_AS(synthetic_predict(truth, 0.0, 20, rng), std::invalid_argument);
    CHECK_THROWS_AS(synthetic_predict(truth, 1.5, 20, rng), std::invalid_argument);
    CHECK(synthetic_predict(TileSet(200), 0.7, 20, rng).empty());

    for (double target : {0.83, 0.70, 0.61, 0.57}) {
        double sum = 0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            const auto p = synthetic_predict(truth, target, 20, rng);
            CHECK(p.count() == truth.count());
            sum += jaccard(p, truth);
        }
        CHECK(sum / n == doctest::Approx(target).epsilon(0.03));
    }
}
