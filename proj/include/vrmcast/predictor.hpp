#ifndef VRMCAST_PREDICTOR_HPP
#define VRMCAST_PREDICTOR_HPP

#include <array>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "vrmcast/scenario.hpp"
#include "vrmcast/tileset.hpp"

namespace vrmcast::predictor {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
struct GruLayerWeights {
    Mat<Scalar> W_g, Z_g;
    Vec<Scalar> b_g;
    Mat<Scalar> W_r, Z_r;
    Vec<Scalar> b_r;
    Mat<Scalar> W, Z;
    Vec<Scalar> b_h;

    Eigen::Index input_dim() const { return W_g.cols(); }
    Eigen::Index hidden() const { return W_g.rows(); }

    static GruLayerWeights zeros(Eigen::Index input, Eigen::Index hidden) {
        GruLayerWeights w;
        for (auto* m : {&w.W_g, &w.W_r, &w.W}) m->setZero(hidden, input);
        for (auto* m : {&w.Z_g, &w.Z_r, &w.Z}) m->setZero(hidden, hidden);
        for (auto* v : {&w.b_g, &w.b_r, &w.b_h}) v->setZero(hidden);
        return w;
    }

    bool shapes_ok() const {
        const auto h = hidden(), in = input_dim();
        return W_r.rows() == h && W_r.cols() == in && W.rows() == h && W.cols() == in &&  //
               Z_g.rows() == h && Z_g.cols() == h && Z_r.rows() == h && Z_r.cols() == h &&  //
               Z.rows() == h && Z.cols() == h && b_g.size() == h && b_r.size() == h && b_h.size() == h;
    }
};

template <class Scalar>
Vec<Scalar> sigmoid(const Vec<Scalar>& z) {
    return (Scalar(1) + (-z.array()).exp()).inverse().matrix();
}

/// One GRU update: gates from the input and previous state, then interpolation
/// between the previous state and the candidate.
template <class Scalar>
Vec<Scalar> gru_step(const Vec<Scalar>& x, const Vec<Scalar>& h_prev, const GruLayerWeights<Scalar>& w) {
    if (x.size() != w.input_dim() || h_prev.size() != w.hidden())
        throw std::invalid_argument("gru_step: shape mismatch");
    const Vec<Scalar> gate = sigmoid<Scalar>(w.W_g * x + w.Z_g * h_prev + w.b_g);
    const Vec<Scalar> reset = sigmoid<Scalar>(w.W_r * x + w.Z_r * h_prev + w.b_r);
    const Vec<Scalar> cand = (w.W * x + w.Z * reset.cwiseProduct(h_prev) + w.b_h).array().tanh().matrix();
    return ((Scalar(1) - gate.array()) * h_prev.array() + gate.array() * cand.array()).matrix();
}

struct PredictionResult {
    Eigen::VectorXd logits;
    TileSet tiles;
};

template <class Scalar>
struct GruModel {
    std::array<GruLayerWeights<Scalar>, 2> layers;
    Mat<Scalar> W_d;
    Vec<Scalar> b_d;
    int input_len = 30;   // T_P
    int horizon = 5;      // T_H
    double cutoff = 0.5;  // gamma_th

    Eigen::Index hidden() const { return layers[0].hidden(); }
    Eigen::Index num_tiles() const { return W_d.rows(); }

    /// Inputs are already normalized; one row per time step.
    Vec<Scalar> logits(const Mat<Scalar>& seq) const {
        if (seq.rows() != input_len) throw std::invalid_argument("forward: sequence length differs from T_P");
        Vec<Scalar> h1 = Vec<Scalar>::Zero(layers[0].hidden());
        Vec<Scalar> h2 = Vec<Scalar>::Zero(layers[1].hidden());
        for (Eigen::Index t = 0; t < seq.rows(); ++t) {
            h1 = gru_step<Scalar>(seq.row(t).transpose(), h1, layers[0]);
            h2 = gru_step<Scalar>(h1.cwiseMax(Scalar(0)), h2, layers[1]);
        }
        return sigmoid<Scalar>(W_d * h2 + b_d);
    }

    PredictionResult forward(const std::vector<scenario::Pose3DoF>& poses) const {
        Mat<Scalar> seq(static_cast<Eigen::Index>(poses.size()), 3);
        for (std::size_t t = 0; t < poses.size(); ++t) {
            const auto r = static_cast<Eigen::Index>(t);
            seq(r, 0) = Scalar(scenario::wrap_yaw(poses[t].yaw) / 180.0);
            seq(r, 1) = Scalar(poses[t].pitch / 90.0);
            seq(r, 2) = Scalar(poses[t].roll / 180.0);
        }
        const Vec<Scalar> p = logits(seq);
        PredictionResult out{p.template cast<double>(), TileSet(static_cast<int>(p.size()))};
        for (Eigen::Index n = 0; n < p.size(); ++n)
            if (double(p(n)) >= cutoff) out.tiles.insert(static_cast<int>(n));
        return out;
    }

    /// Throws std::invalid_argument when layer or head shapes disagree.
    void validate() const;
};

using PredictorModel = GruModel<double>;

template <class Scalar>
void GruModel<Scalar>::validate() const {
    if (!layers[0].shapes_ok() || !layers[1].shapes_ok()) throw std::invalid_argument("GRU layer shapes inconsistent");
    if (layers[0].input_dim() != 3) throw std::invalid_argument("GRU input dimension must be 3");
    if (layers[1].input_dim() != layers[0].hidden()) throw std::invalid_argument("GRU layers do not chain");
    if (W_d.cols() != layers[1].hidden() || b_d.size() != W_d.rows())
        throw std::invalid_argument("dense head shape mismatch");
    if (W_d.rows() < 1 || W_d.rows() > kMaxTiles) throw std::invalid_argument("tile count out of range");
    if (input_len < 1 || horizon < 0) throw std::invalid_argument("bad T_P/T_H");
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw std::invalid_argument("cutoff must lie in (0,1)");
}

/// Reads a "GRUFOV1" weight file. Errors: bad magic, truncation, non-finite values,
/// shape mismatch, layer count other than 2.
PredictorModel load_weights(const std::filesystem::path& path);
void save_weights(const PredictorModel& model, const std::filesystem::path& path);

/// Random model with weights uniform in +-scale/sqrt(fan_in); for tests and smoke runs.
PredictorModel random_model(int hidden, int num_tiles, int input_len, int horizon, std::uint64_t seed,
                            double scale = 1.0);

/// Perturbs `truth` by swapping boundary tiles of the prediction for adjacent tiles outside
/// the truth. The number of swaps s is drawn so that E[(m-s)/(m+s)] hits `target` for a
/// set of size m. The result has the same size as `truth`.
TileSet synthetic_predict(const TileSet& truth, double target, int tiles_h, std::mt19937_64& rng);

}  // namespace vrmcast::predictor

#endif  // VRMCAST_PREDICTOR_HPP
