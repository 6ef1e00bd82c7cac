#include "vrmcast/predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace vrmcast::predictor {

namespace {

constexpr char kMagic[] = "GRUFOV1\n";
constexpr std::size_t kMagicLen = 8;

class Reader {
public:
    explicit Reader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}

    void expect_magic() {
        need(kMagicLen);
        if (std::memcmp(buf_.data(), kMagic, kMagicLen) != 0) throw std::runtime_error("weight file: bad magic");
        pos_ += kMagicLen;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 8;
        const double d = std::bit_cast<double>(v);
        if (!std::isfinite(d)) throw std::runtime_error("weight file: non-finite value");
        return d;
    }
    void fill(Mat<double>& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
    void fill(Vec<double>& v, Eigen::Index n) {
        v.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw std::runtime_error("weight file: truncated");
    }
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

class Writer {
public:
    void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double d) {
        const auto v = std::bit_cast<std::uint64_t>(d);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    template <class Derived>
    void dense(const Eigen::MatrixBase<Derived>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
    const std::vector<char>& data() const { return out_; }

private:
    std::vector<char> out_;
};

void read_layer(Reader& rd, GruLayerWeights<double>& w, Eigen::Index in, Eigen::Index h) {
    rd.fill(w.W_g, h, in);
    rd.fill(w.Z_g, h, h);
    rd.fill(w.b_g, h);
    rd.fill(w.W_r, h, in);
    rd.fill(w.Z_r, h, h);
    rd.fill(w.b_r, h);
    rd.fill(w.W, h, in);
    rd.fill(w.Z, h, h);
    rd.fill(w.b_h, h);
}

void write_layer(Writer& wr, const GruLayerWeights<double>& w) {
    wr.dense(w.W_g);
    wr.dense(w.Z_g);
    wr.dense(w.b_g);
    wr.dense(w.W_r);
    wr.dense(w.Z_r);
    wr.dense(w.b_r);
    wr.dense(w.W);
    wr.dense(w.Z);
    wr.dense(w.b_h);
}

}  // namespace

PredictorModel load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weight file " + path.string());
    Reader rd(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));

    rd.expect_magic();
    const auto layers = rd.u32();
    const auto input = rd.u32();
    const auto hidden = rd.u32();
    const auto tiles = rd.u32();
    const auto t_p = rd.u32();
    const auto t_h = rd.u32();
    const double cutoff = rd.f64();

    if (layers != 2) throw std::runtime_error("weight file: expected 2 GRU layers, got " + std::to_string(layers));
    if (input != 3) throw std::runtime_error("weight file: input dimension must be 3");
    if (hidden == 0 || hidden > 65536) throw std::runtime_error("weight file: bad hidden size");
    if (tiles == 0 || tiles > static_cast<std::uint32_t>(kMaxTiles)) throw std::runtime_error("weight file: bad N");
    if (t_p == 0 || t_p > 100000 || t_h > 100000) throw std::runtime_error("weight file: bad T_P/T_H");

    PredictorModel m;
    m.input_len = static_cast<int>(t_p);
    m.horizon = static_cast<int>(t_h);
    m.cutoff = cutoff;
    const auto h = static_cast<Eigen::Index>(hidden);
    read_layer(rd, m.layers[0], input, h);
    read_layer(rd, m.layers[1], h, h);
    rd.fill(m.W_d, static_cast<Eigen::Index>(tiles), h);
    rd.fill(m.b_d, static_cast<Eigen::Index>(tiles));
    if (!rd.at_end()) throw std::runtime_error("weight file: trailing bytes");
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("weight file: ") + e.what());
    }
    return m;
}

void save_weights(const PredictorModel& m, const std::filesystem::path& path) {
    m.validate();
    Writer wr;
    wr.bytes(kMagic, kMagicLen);
    wr.u32(2);
    wr.u32(static_cast<std::uint32_t>(m.layers[0].input_dim()));
    wr.u32(static_cast<std::uint32_t>(m.hidden()));
    wr.u32(static_cast<std::uint32_t>(m.num_tiles()));
    wr.u32(static_cast<std::uint32_t>(m.input_len));
    wr.u32(static_cast<std::uint32_t>(m.horizon));
    wr.f64(m.cutoff);
    write_layer(wr, m.layers[0]);
    write_layer(wr, m.layers[1]);
    wr.dense(m.W_d);
    wr.dense(m.b_d);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write weight file " + path.string());
    out.write(wr.data().data(), static_cast<std::streamsize>(wr.data().size()));
    if (!out) throw std::runtime_error("short write on " + path.string());
}

PredictorModel random_model(int hidden, int num_tiles, int input_len, int horizon, std::uint64_t seed,
                            double scale) {
    std::mt19937_64 rng(seed);
    auto fill = [&](auto& m, double fan_in) {
        std::uniform_real_distribution<double> u(-scale / std::sqrt(fan_in), scale / std::sqrt(fan_in));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    };
    PredictorModel m;
    m.input_len = input_len;
    m.horizon = horizon;
    for (int l = 0; l < 2; ++l) {
        const int in = l == 0 ? 3 : hidden;
        auto& w = m.layers[static_cast<std::size_t>(l)];
        w = GruLayerWeights<double>::zeros(in, hidden);
        for (auto* x : {&w.W_g, &w.W_r, &w.W}) fill(*x, in);
        for (auto* x : {&w.Z_g, &w.Z_r, &w.Z}) fill(*x, hidden);
        for (auto* x : {&w.b_g, &w.b_r, &w.b_h}) fill(*x, hidden);
    }
    m.W_d.resize(num_tiles, hidden);
    m.b_d.resize(num_tiles);
    fill(m.W_d, hidden);
    fill(m.b_d, hidden);
    m.validate();
    return m;
}

TileSet synthetic_predict(const TileSet& truth, double target, int tiles_h, std::mt19937_64& rng) {
    if (!(target > 0.0 && target <= 1.0)) throw std::invalid_argument("synthetic_predict: target must lie in (0,1]");
    const int m = truth.count();
    if (m == 0 || target >= 1.0) return truth;

    // Interpolate between floor and ceil of the continuous swap count in Jaccard space.
    const double s_star = m * (1.0 - target) / (1.0 + target);
    const int lo = static_cast<int>(std::floor(s_star));
    const int hi = std::min(m, lo + 1);
    auto jac = [m](int s) { return static_cast<double>(m - s) / (m + s); };
    int swaps = lo;
    if (hi != lo) {
        const double p_hi = (jac(lo) - target) / (jac(lo) - jac(hi));
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p_hi) swaps = hi;
    }

    const int n = truth.size();
    const int rows = n / tiles_h;
    auto neighbours = [&](int t, int out[4]) {
        const int r = t / tiles_h, c = t % tiles_h;
        int k = 0;
        out[k++] = r * tiles_h + (c + 1) % tiles_h;
        out[k++] = r * tiles_h + (c + tiles_h - 1) % tiles_h;
        out[k++] = r > 0 ? t - tiles_h : -1;
        out[k++] = r + 1 < rows ? t + tiles_h : -1;
    };

    TileSet pred = truth;
    std::vector<int> removable, addable;
    for (int s = 0; s < swaps; ++s) {
        removable.clear();
        addable.clear();
        for (int t = 0; t < n; ++t) {
            int nb[4];
            neighbours(t, nb);
            if (pred.contains(t)) {
                if (!truth.contains(t)) continue;
                for (int v : nb)
                    if (v < 0 || !pred.contains(v)) {
                        removable.push_back(t);
                        break;
                    }
            } else if (!truth.contains(t)) {
                for (int v : nb)
                    if (v >= 0 && pred.contains(v)) {
                        addable.push_back(t);
                        break;
                    }
            }
        }
        if (removable.empty() || addable.empty()) break;
        const int add = addable[std::uniform_int_distribution<std::size_t>(0, addable.size() - 1)(rng)];
        pred.insert(add);
        const int rem = removable[std::uniform_int_distribution<std::size_t>(0, removable.size() - 1)(rng)];
        pred.erase(rem);
    }
    return pred;
}

}  // namespace vrmcast::predictor
