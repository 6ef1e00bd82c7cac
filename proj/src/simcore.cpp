#include "vrmcast/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "vrmcast/errors.hpp"

namespace vrmcast::sim {

namespace {

constexpr double kBitEps = 1e-6;

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, index};
    return std::mt19937_64(seq);
}

using ChunkKey = std::pair<std::int64_t, int>;

struct Pending {
    double remaining = 0.0;
    std::int64_t t_a = 0;
};

struct PoolEntry {
    std::int64_t frame = 0;
    int tile = 0;
    std::vector<int> users;
    double urgency = 0.0;
};

bool more_urgent(const PoolEntry& a, const PoolEntry& b) {
    if (a.urgency != b.urgency) return a.urgency > b.urgency;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.tile < b.tile;
}

struct UserState {
    int id = 0;
    int video = 0;
    int seat = 0;
    Eigen::Vector3d pos;
    lyapunov::UserQueueState q;
    std::map<ChunkKey, Pending> backlog;
    std::map<std::int64_t, TileSet> delivered;

    std::int64_t frame = 0;
    std::int64_t t_a = 0;
    TileSet fov;
    bool complete = false;
    bool at_request = false;
    std::int64_t t_complete = -1;

    TileSet pred;
    bool violated_prev = false;
    std::mt19937_64 pred_rng;

    double served = 0.0;
    double dropped = 0.0;
    double admitted = 0.0;
    std::int64_t violation_slots = 0;
};

struct ClusterState {
    int video = 0;
    std::vector<int> members;
    TileSet fov;
    std::vector<PoolEntry> pool;
    std::vector<std::vector<matching::Beam>> beams;  // per SBS
};

}  // namespace

std::int64_t InvariantCounters::total() const {
    return negative_queue + queue_mismatch + partition_errors + cluster_fov_errors + drift_bound_failures +
           quota_violations + unstable_matchings + proposal_overruns + delay_bound_violations + conservation_errors;
}

nlohmann::ordered_json InvariantCounters::to_json() const {
    return {{"negative_queue", negative_queue},
            {"queue_mismatch", queue_mismatch},
            {"partition_errors", partition_errors},
            {"cluster_fov_errors", cluster_fov_errors},
            {"drift_bound_failures", drift_bound_failures},
            {"quota_violations", quota_violations},
            {"unstable_matchings", unstable_matchings},
            {"proposal_overruns", proposal_overruns},
            {"delay_bound_violations", delay_bound_violations},
            {"conservation_errors", conservation_errors}};
}

nlohmann::ordered_json MetricsReport::to_json() const {
    return {{"scheme", scheme},
            {"seed", seed},
            {"users", users},
            {"frames", frames},
            {"slots", slots},
            {"avg_delay_ms", avg_delay_ms},
            {"p99_delay_ms", p99_delay_ms},
            {"p99_method", "nearest-rank"},
            {"hd_delivery_rate", hd_delivery_rate},
            {"delivered_jaccard", delivered_jaccard},
            {"violation_fraction", violation_fraction},
            {"prediction_jaccard", prediction_jaccard},
            {"bits_admitted", bits_admitted},
            {"bits_delivered", bits_delivered},
            {"bits_dropped", bits_dropped},
            {"bits_residual", bits_residual},
            {"drift_checks", drift_checks},
            {"invariants", invariants.to_json()}};
}

double percentile_nearest_rank(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must lie in (0, 100]");
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}

MetricsReport record_metrics(const std::vector<FrameRecord>& frames) {
    MetricsReport r;
    r.frames = static_cast<std::int64_t>(frames.size());
    if (frames.empty()) return r;
    std::vector<double> delays;
    delays.reserve(frames.size());
    double sum_d = 0.0, sum_j = 0.0;
    std::int64_t hd = 0;
    for (const auto& f : frames) {
        delays.push_back(f.delay_ms);
        sum_d += f.delay_ms;
        sum_j += f.jaccard_delivered;
        hd += f.hd_complete ? 1 : 0;
    }
    const auto n = static_cast<double>(frames.size());
    r.avg_delay_ms = sum_d / n;
    r.p99_delay_ms = percentile_nearest_rank(std::move(delays), 99.0);
    r.hd_delivery_rate = static_cast<double>(hd) / n;
    r.delivered_jaccard = sum_j / n;
    return r;
}

std::vector<scenario::PoseTrace> synthetic_poses(const SimConfig& cfg, std::uint64_t seed, std::int64_t frames) {
    const int nv = cfg.num_videos;
    const auto nf = static_cast<std::size_t>(std::max<std::int64_t>(frames, 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double theta = cfg.pose_theta;

    std::vector<std::vector<scenario::Pose3DoF>> attractor(static_cast<std::size_t>(nv));
    for (int v = 0; v < nv; ++v) {
        auto rng = stream(seed, 11, static_cast<std::uint32_t>(v));
        auto& a = attractor[static_cast<std::size_t>(v)];
        a.resize(nf);
        a[0].yaw = std::uniform_real_distribution<double>(-180.0, 180.0)(rng);
        a[0].pitch = 0.0;
        for (std::size_t f = 1; f < nf; ++f) {
            a[f].yaw = scenario::wrap_yaw(a[f - 1].yaw + cfg.attractor_sigma_deg * gauss(rng));
            a[f].pitch = std::clamp((1.0 - theta) * a[f - 1].pitch + 0.5 * cfg.attractor_sigma_deg * gauss(rng),
                                    -45.0, 45.0);
        }
    }

    std::vector<scenario::PoseTrace> out(static_cast<std::size_t>(cfg.num_users()));
    for (int u = 0; u < cfg.num_users(); ++u) {
        auto rng = stream(seed, 12, static_cast<std::uint32_t>(u));
        auto& tr = out[static_cast<std::size_t>(u)];
        tr.user_id = u;
        tr.video_id = u / cfg.users_per_video;
        const auto& a = attractor[static_cast<std::size_t>(tr.video_id)];
        tr.poses.resize(nf);
        tr.poses[0].yaw = scenario::wrap_yaw(a[0].yaw + 10.0 * gauss(rng));
        tr.poses[0].pitch = std::clamp(5.0 * gauss(rng), -90.0, 90.0);
        for (std::size_t f = 1; f < nf; ++f) {
            const auto& prev = tr.poses[f - 1];
            double d = std::fmod(a[f].yaw - prev.yaw + 540.0, 360.0) - 180.0;
            tr.poses[f].yaw = scenario::wrap_yaw(prev.yaw + theta * d + cfg.pose_sigma_deg * gauss(rng));
            tr.poses[f].pitch = std::clamp(prev.pitch + theta * (a[f].pitch - prev.pitch) +
                                               cfg.pitch_sigma_deg * gauss(rng),
                                           -90.0, 90.0);
            tr.poses[f].roll = 0.0;
        }
    }
    return out;
}

struct Simulator::Impl {
    SimConfig cfg;
    Scheme scheme;
    std::uint64_t seed;
    scenario::TheaterLayout layout;
    scenario::VideoCatalog catalog;
    scenario::SimClock clock;
    channel::ChannelParams chan;
    lyapunov::LyapunovParams lyap;
    std::optional<predictor::PredictorModel> model;

    bool proactive = false;
    bool delay_queue = false;
    int horizon = 0;
    int num_sbs = 0;
    double chunk_bits = 0.0;
    double slot_s = 0.0;
    double p_w = 0.0;
    double noise_w = 0.0;
    double g_rx_main = 0.0;
    double target_j = 1.0;

    std::vector<scenario::PoseTrace> traces;
    std::vector<UserState> users;
    std::vector<ClusterState> clusters;
    std::vector<int> label;

    std::vector<channel::LinkSampler> links;  // [b * U + u]
    Eigen::MatrixXd h;                        // B x U, linear channel gain
    Eigen::MatrixXd az_bu;                    // azimuth of user seen from SBS
    Eigen::MatrixXd az_ub;                    // azimuth of SBS seen from user (U x B)
    Eigen::MatrixXd gtx;                      // B x U, gain of u's beam from b
    matching::InterferenceEstimator estimator;
    std::mt19937_64 da_rng;

    std::int64_t t = 0;
    std::int64_t total_slots = 0;
    std::int64_t last_frame = 0;   // frame of the final slot
    std::int64_t eval_frames = 0;  // frames whose deadline falls inside the run

    std::vector<FrameRecord> records;
    InvariantCounters inv;
    double total_admitted = 0.0, total_delivered = 0.0, total_dropped = 0.0;
    std::int64_t drift_checks = 0;
    double pred_j_sum = 0.0;
    std::int64_t pred_j_count = 0;

    Impl(const SimConfig& c, Scheme s, std::uint64_t sd);

    double grx(int u, int b_int, int b_serv) const {
        const double dev = channel::abs_angle_diff_deg(az_ub(u, b_int), az_ub(u, b_serv));
        return channel::antenna_gain(channel::deg_to_rad(chan.rx_beamwidth_deg), channel::deg_to_rad(dev),
                                     chan.sidelobe_gain);
    }

    void begin_frame(std::int64_t f);
    void predict(std::int64_t f, std::int64_t f_p);
    void recluster(std::int64_t f);
    void admit_frame(std::int64_t f, std::int64_t f_p);
    void rebuild_pools();
    void end_frame(std::int64_t f);
    void update_queues(std::int64_t f, const std::vector<bool>& violated);
    bool step();
    bool started = false;
    RunResult finish();
};

Simulator::Impl::Impl(const SimConfig& c, Scheme s, std::uint64_t sd)
    : cfg(c), scheme(s), seed(sd), da_rng(stream(sd, 21)) {
    cfg.validate();
    layout = scenario::build_theater(cfg.theater());
    catalog = cfg.catalog();
    clock = cfg.clock();
    chan = cfg.channel();
    lyap = cfg.lyapunov();
    num_sbs = layout.num_sbs();
    horizon = cfg.horizon_frames;
    proactive = (s == Scheme::MPROAC || s == Scheme::MPROAC_PLUS) && horizon > 0;
    delay_queue = s == Scheme::MPROAC_PLUS;
    chunk_bits = cfg.chunk_bits();
    slot_s = cfg.slot_ms * 1e-3;
    p_w = chan.tx_power_w();
    noise_w = chan.noise_power_w();
    g_rx_main = channel::antenna_gain(channel::deg_to_rad(chan.rx_beamwidth_deg), 0.0, chan.sidelobe_gain);

    total_slots = static_cast<std::int64_t>(std::floor(cfg.sim_time_ms / cfg.slot_ms + 1e-9));
    last_frame = total_slots > 0 ? clock.frame_index(total_slots) : 0;
    eval_frames = 0;
    while (eval_frames + 1 <= last_frame && clock.last_slot_of_frame(eval_frames + 1) <= total_slots) ++eval_frames;

    if (cfg.predictor == "gru") {
        model = predictor::load_weights(cfg.weights_path);
        if (model->num_tiles() != catalog.num_tiles())
            throw ConfigError("weights_path: model predicts " + std::to_string(model->num_tiles()) +
                              " tiles, catalog has " + std::to_string(catalog.num_tiles()));
        model->cutoff = cfg.cutoff;
    } else {
        target_j = cfg.effective_target_jaccard();
    }

    const int nu = cfg.num_users();
    const std::int64_t pose_frames = last_frame + horizon + 1;
    if (!cfg.pose_trace_path.empty()) {
        auto loaded = scenario::load_pose_traces(cfg.pose_trace_path);
        std::map<int, std::vector<const scenario::PoseTrace*>> by_video;
        for (const auto& [id, tr] : loaded) by_video[tr.video_id].push_back(&tr);
        if (by_video.empty()) throw DataError("pose trace file has no rows");
        std::vector<int> vids;
        for (const auto& [v, list] : by_video) vids.push_back(v);
        traces.resize(static_cast<std::size_t>(nu));
        for (int u = 0; u < nu; ++u) {
            const int v = u / cfg.users_per_video, j = u % cfg.users_per_video;
            const auto& list = by_video[vids[static_cast<std::size_t>(v) % vids.size()]];
            traces[static_cast<std::size_t>(u)] = *list[static_cast<std::size_t>(j) % list.size()];
            traces[static_cast<std::size_t>(u)].user_id = u;
            traces[static_cast<std::size_t>(u)].video_id = v;
        }
    } else {
        traces = synthetic_poses(cfg, seed, pose_frames);
    }

    std::vector<int> seats(static_cast<std::size_t>(layout.num_seats()));
    std::iota(seats.begin(), seats.end(), 0);
    auto seat_rng = stream(seed, 13);
    std::shuffle(seats.begin(), seats.end(), seat_rng);
    seats.resize(static_cast<std::size_t>(nu));

    users.resize(static_cast<std::size_t>(nu));
    for (int u = 0; u < nu; ++u) {
        auto& us = users[static_cast<std::size_t>(u)];
        us.id = u;
        us.video = u / cfg.users_per_video;
        us.seat = seats[static_cast<std::size_t>(u)];
        us.pos = layout.seats[static_cast<std::size_t>(us.seat)];
        us.fov = TileSet(catalog.num_tiles());
        us.pred = TileSet(catalog.num_tiles());
        us.pred_rng = stream(seed, 14, static_cast<std::uint32_t>(u));
    }

    h.resize(num_sbs, nu);
    az_bu.resize(num_sbs, nu);
    az_ub.resize(nu, num_sbs);
    gtx = Eigen::MatrixXd::Ones(num_sbs, nu);
    links.reserve(static_cast<std::size_t>(num_sbs * nu));
    for (int b = 0; b < num_sbs; ++b)
        for (int u = 0; u < nu; ++u) {
            const auto& us = users[static_cast<std::size_t>(u)];
            const int blockers =
                scenario::blocker_count(layout, seats, us.seat, b, cfg.blocker_radius_m);
            links.emplace_back(chan, layout.sbs[static_cast<std::size_t>(b)], us.pos, blockers, seed, b, u);
            az_bu(b, u) = channel::azimuth_deg(layout.sbs[static_cast<std::size_t>(b)], us.pos);
            az_ub(u, b) = channel::azimuth_deg(us.pos, layout.sbs[static_cast<std::size_t>(b)]);
        }
    estimator = matching::InterferenceEstimator(nu, cfg.nu1, cfg.nu2);
    label.assign(static_cast<std::size_t>(nu), -1);
}

void Simulator::Impl::predict(std::int64_t f, std::int64_t f_p) {
    if (scheme == Scheme::UREAC) return;
    for (auto& us : users) {
        const auto& tr = traces[static_cast<std::size_t>(us.id)];
        if (horizon == 0) {
            us.pred = us.fov;
            continue;
        }
        const TileSet truth = scenario::pose_to_fov(tr.at_frame(f_p), catalog);
        if (model) {
            std::vector<scenario::Pose3DoF> seq;
            for (std::int64_t k = f - model->input_len + 1; k <= f; ++k) seq.push_back(tr.at_frame(std::max<std::int64_t>(k, 1)));
            us.pred = model->forward(seq).tiles;
        } else {
            us.pred = predictor::synthetic_predict(truth, target_j, catalog.tiles_h, us.pred_rng);
        }
        pred_j_sum += jaccard(us.pred, truth);
        ++pred_j_count;
    }
}

void Simulator::Impl::recluster(std::int64_t) {
    clusters.clear();
    const int nu = static_cast<int>(users.size());
    if (scheme == Scheme::UREAC) {
        for (int u = 0; u < nu; ++u) {
            ClusterState c;
            c.video = users[static_cast<std::size_t>(u)].video;
            c.members = {u};
            c.fov = users[static_cast<std::size_t>(u)].fov;
            clusters.push_back(std::move(c));
        }
    } else {
        for (int v = 0; v < cfg.num_videos; ++v) {
            std::vector<int> ids;
            std::vector<TileSet> fovs;
            std::vector<Eigen::Vector3d> pos;
            for (const auto& us : users)
                if (us.video == v) {
                    ids.push_back(us.id);
                    fovs.push_back(us.pred);
                    pos.push_back(us.pos);
                }
            if (ids.empty()) continue;
            const int k = std::min<int>(cfg.clusters_per_video, static_cast<int>(ids.size()));
            auto part = clustering::cluster_users(fovs, pos, k, cfg.d2d_min_m);
            if (cfg.check_invariants) {
                std::vector<int> seen(ids.size(), 0);
                for (std::size_t c = 0; c < part.clusters.size(); ++c) {
                    if (part.clusters[c].empty()) ++inv.partition_errors;
                    for (int m : part.clusters[c]) {
                        ++seen[static_cast<std::size_t>(m)];
                        if (!fovs[static_cast<std::size_t>(m)].is_subset_of(part.cluster_fov[c])) ++inv.cluster_fov_errors;
                    }
                }
                for (int s : seen)
                    if (s != 1) ++inv.partition_errors;
                if (static_cast<int>(part.clusters.size()) != k) ++inv.partition_errors;
            }
            for (std::size_t c = 0; c < part.clusters.size(); ++c) {
                ClusterState cs;
                cs.video = v;
                for (int m : part.clusters[c]) cs.members.push_back(ids[static_cast<std::size_t>(m)]);
                cs.fov = part.cluster_fov[c];
                clusters.push_back(std::move(cs));
            }
        }
    }

    for (std::size_t k = 0; k < clusters.size(); ++k) {
        auto& c = clusters[k];
        for (int u : c.members) label[static_cast<std::size_t>(u)] = static_cast<int>(k);
        c.beams.resize(static_cast<std::size_t>(num_sbs));
        for (int b = 0; b < num_sbs; ++b) {
            std::vector<double> az;
            for (int u : c.members) az.push_back(az_bu(b, u));
            auto& beams = c.beams[static_cast<std::size_t>(b)];
            beams = matching::group_beams(az, chan.tx_beamwidths_deg, chan.rf_chains_per_sbs);
            for (const auto& beam : beams)
                for (int m : beam.members) {
                    const int u = c.members[static_cast<std::size_t>(m)];
                    gtx(b, u) = matching::beam_gain(beam, az_bu(b, u), chan.sidelobe_gain);
                }
        }
    }
}

void Simulator::Impl::admit_frame(std::int64_t f, std::int64_t f_p) {
    const int n = catalog.num_tiles();
    for (auto& us : users) {
        auto queued = [&](std::int64_t frame) {
            TileSet s(n);
            for (auto it = us.backlog.lower_bound({frame, -1}); it != us.backlog.end() && it->first.first == frame; ++it)
                s.insert(it->first.second);
            return s;
        };
        auto delivered_of = [&](std::int64_t frame) {
            auto it = us.delivered.find(frame);
            return it == us.delivered.end() ? TileSet(n) : it->second;
        };

        const TileSet missing = us.fov - delivered_of(f) - queued(f);
        TileSet ahead(n);
        if (proactive && f_p <= last_frame)
            ahead = clusters[static_cast<std::size_t>(label[static_cast<std::size_t>(us.id)])].fov - delivered_of(f_p) -
                    queued(f_p);

        // delay queue of the new frame starts empty
        const auto alpha = lyapunov::alpha_weight(us.q.q, 0.0, lyap.epsilon, false);
        const int a = lyapunov::admit(us.q.z, alpha.total);
        us.admitted = lyapunov::admitted_bits(a, a, missing, ahead, chunk_bits);
        if (!a) continue;
        for (int tile : missing.tiles()) us.backlog[{f, tile}] = {chunk_bits, us.t_a};
        for (int tile : ahead.tiles()) us.backlog[{f_p, tile}] = {chunk_bits, us.t_a};
    }
}

void Simulator::Impl::rebuild_pools() {
    for (auto& c : clusters) {
        c.pool.clear();
        std::map<ChunkKey, std::size_t> index;
        for (int u : c.members)
            for (const auto& [key, p] : users[static_cast<std::size_t>(u)].backlog) {
                auto [it, fresh] = index.emplace(key, c.pool.size());
                if (fresh) c.pool.push_back({key.first, key.second, {}, 0.0});
                c.pool[it->second].users.push_back(u);
            }
    }
}

void Simulator::Impl::begin_frame(std::int64_t f) {
    // Runs at the end of the slot before the frame starts, so its admissions arrive with that slot's update.
    const std::int64_t f_p = f + horizon;
    for (auto& us : users) {
        us.frame = f;
        us.t_a = t + 1;
        us.fov = scenario::pose_to_fov(traces[static_cast<std::size_t>(us.id)].at_frame(f), catalog);
        auto it = us.delivered.find(f);
        us.complete = it != us.delivered.end() && us.fov.is_subset_of(it->second);
        us.at_request = us.complete;
        us.t_complete = us.complete ? us.t_a : -1;
    }
    predict(f, f_p);
    recluster(f);
    admit_frame(f, f_p);
    rebuild_pools();
}

void Simulator::Impl::end_frame(std::int64_t f) {
    const bool reactive = scheme == Scheme::UREAC || scheme == Scheme::MREAC;
    for (auto& us : users) {
        if (f <= eval_frames) {
            auto it = us.delivered.find(f);
            const TileSet got = it == us.delivered.end() ? TileSet(catalog.num_tiles()) : it->second;
            FrameRecord r;
            r.user = us.id;
            r.frame = f;
            r.t_request_ms = static_cast<double>(f - 1) * cfg.frame_period_ms;
            r.deadline_ms = static_cast<double>(f) * cfg.frame_period_ms;
            r.hd_complete = us.complete;
            if (us.at_request)
                r.delay_ms = 0.0;
            else if (us.complete)
                r.delay_ms = static_cast<double>(us.t_complete - us.t_a + 1) * cfg.slot_ms;
            else
                r.delay_ms = cfg.frame_period_ms;
            r.jaccard_delivered = jaccard(got, us.fov);
            r.tiles_sent = got.count();
            r.tiles_fov = us.fov.count();
            if (cfg.check_invariants && reactive && us.complete && !us.at_request) {
                const double bound_ms = chunk_bits * r.tiles_fov / chan.mu_max() * 1e3;
                if (r.delay_ms < bound_ms - 1e-9) ++inv.delay_bound_violations;
            }
            records.push_back(r);
        }
        us.delivered.erase(us.delivered.begin(), us.delivered.upper_bound(f));
        for (auto it = us.backlog.begin(); it != us.backlog.end() && it->first.first <= f;) {
            us.dropped += it->second.remaining;
            it = us.backlog.erase(it);
        }
    }
    for (auto& c : clusters)
        c.pool.erase(std::remove_if(c.pool.begin(), c.pool.end(), [f](const PoolEntry& e) { return e.frame <= f; }),
                     c.pool.end());
}

void Simulator::Impl::update_queues(std::int64_t f, const std::vector<bool>& violated) {
    const int nu = static_cast<int>(users.size());
    std::vector<lyapunov::UserQueueState> before, after;
    std::vector<lyapunov::SlotDecision> decisions;
    const bool check = cfg.check_invariants && nu > 0;
    for (int u = 0; u < nu; ++u) {
        auto& us = users[static_cast<std::size_t>(u)];
        lyapunov::SlotDecision d;
        d.served = us.served;
        d.dropped = us.dropped;
        d.admitted = us.admitted;
        d.gamma = lyapunov::select_auxiliary(us.q.z, lyap.v_delta, lyap.a_max);
        d.violated = violated[static_cast<std::size_t>(u)];
        d.current_frame = f;
        d.delay_queue_enabled = delay_queue;
        if (check) {
            before.push_back(us.q);
            decisions.push_back(d);
        }
        us.q = lyapunov::update_queues(us.q, d, lyap.epsilon);
        total_admitted += us.admitted;
        total_dropped += us.dropped;
        us.served = us.dropped = us.admitted = 0.0;
        us.violated_prev = d.violated;
        if (check) {
            after.push_back(us.q);
            if (us.q.q < 0 || us.q.z < 0) ++inv.negative_queue;
            for (const auto& [frame, v] : us.q.f)
                if (v < 0) ++inv.negative_queue;
            double backlog = 0.0;
            for (const auto& [key, p] : us.backlog) backlog += p.remaining;
            if (std::abs(backlog - us.q.q) > 1e-6 * std::max(1.0, us.q.q) + 1e-3) ++inv.queue_mismatch;
        }
    }
    if (check) {
        const auto dc = lyapunov::drift_bound_check(before, decisions, after, lyap.v_delta, lyap.epsilon);
        ++drift_checks;
        if (!dc.holds) ++inv.drift_bound_failures;
    }
}

bool Simulator::Impl::step() {
    if (t >= total_slots) return false;
    if (t == 0 && !started) {
        started = true;
        begin_frame(1);
        update_queues(0, std::vector<bool>(users.size(), false));
    }
    ++t;
    const std::int64_t f = clock.frame_index(t);
    if (t == clock.first_slot_of_frame(f))
        for (auto& us : users) {
            for (auto it = us.q.f.begin(); it != us.q.f.end();) it = it->first < f ? us.q.f.erase(it) : std::next(it);
            us.violated_prev = false;
        }

    const int nu = static_cast<int>(users.size());
    const int nk = static_cast<int>(clusters.size());
    for (int b = 0; b < num_sbs; ++b)
        for (int u = 0; u < nu; ++u) h(b, u) = links[static_cast<std::size_t>(b * nu + u)].at_slot(t, cfg.slot_ms).gain_lin();

    // Urgency weights from the queue state at the start of the slot.
    std::vector<lyapunov::Alpha> alpha(static_cast<std::size_t>(nu));
    for (int u = 0; u < nu; ++u) {
        const auto& us = users[static_cast<std::size_t>(u)];
        alpha[static_cast<std::size_t>(u)] =
            lyapunov::alpha_weight(us.q.q, delay_queue ? us.q.sum_f() : 0.0, lyap.epsilon, delay_queue && us.violated_prev);
    }
    std::vector<int> top(static_cast<std::size_t>(nk), -1);
    for (int k = 0; k < nk; ++k) {
        auto& pool = clusters[static_cast<std::size_t>(k)].pool;
        for (std::size_t e = 0; e < pool.size(); ++e) {
            auto& entry = pool[e];
            entry.urgency = 0.0;
            for (int u : entry.users) {
                const auto& a = alpha[static_cast<std::size_t>(u)];
                const auto& us = users[static_cast<std::size_t>(u)];
                entry.urgency += a.q + (delay_queue && us.violated_prev && entry.frame == f ? a.f : 0.0);
            }
            if (top[static_cast<std::size_t>(k)] < 0 || more_urgent(entry, pool[static_cast<std::size_t>(top[static_cast<std::size_t>(k)])]))
                top[static_cast<std::size_t>(k)] = static_cast<int>(e);
        }
    }

    matching::UtilityTables ut;
    ut.sbs_side = Eigen::MatrixXd::Zero(num_sbs, nk);
    ut.cluster_side = Eigen::MatrixXd::Zero(num_sbs, nk);
    ut.eligible.assign(static_cast<std::size_t>(nk), false);
    for (int k = 0; k < nk; ++k) {
        if (top[static_cast<std::size_t>(k)] < 0) continue;
        ut.eligible[static_cast<std::size_t>(k)] = true;
        const auto& entry = clusters[static_cast<std::size_t>(k)].pool[static_cast<std::size_t>(top[static_cast<std::size_t>(k)])];
        for (int b = 0; b < num_sbs; ++b) {
            double best = std::numeric_limits<double>::infinity();
            for (int u : entry.users) {
                const double s = p_w * h(b, u) * gtx(b, u) * g_rx_main / (estimator.estimate(u) + noise_w);
                best = std::min(best, channel::unicast_rate(s, chan));
            }
            ut.sbs_side(b, k) = entry.urgency;
            ut.cluster_side(b, k) = best;
        }
    }
    const auto m = matching::deferred_acceptance(ut, da_rng);
    if (cfg.check_invariants) {
        if (!matching::is_stable(m, ut)) ++inv.unstable_matchings;
        if (m.proposals > num_sbs * nk) ++inv.proposal_overruns;
        for (int b = 0; b < num_sbs; ++b) {
            const int k = m.cluster_of_sbs[static_cast<std::size_t>(b)];
            if (k >= 0 && m.sbs_of_cluster[static_cast<std::size_t>(k)] != b) ++inv.quota_violations;
        }
    }

    // True interference and rates for every member of a served cluster.
    std::vector<double> rate(static_cast<std::size_t>(nu), 0.0);
    for (int b = 0; b < num_sbs; ++b) {
        const int k = m.cluster_of_sbs[static_cast<std::size_t>(b)];
        if (k < 0) continue;
        for (int u : clusters[static_cast<std::size_t>(k)].members) {
            double interference = 0.0;
            for (int b2 = 0; b2 < num_sbs; ++b2) {
                const int k2 = m.cluster_of_sbs[static_cast<std::size_t>(b2)];
                if (b2 == b || k2 < 0) continue;
                const double g_rx = grx(u, b2, b);
                for (const auto& beam : clusters[static_cast<std::size_t>(k2)].beams[static_cast<std::size_t>(b2)])
                    interference += p_w * h(b2, u) * matching::beam_gain(beam, az_bu(b2, u), chan.sidelobe_gain) * g_rx;
            }
            const double s = p_w * h(b, u) * gtx(b, u) * g_rx_main / (interference + noise_w);
            rate[static_cast<std::size_t>(u)] = channel::unicast_rate(s, chan);
            estimator.record(u, interference);
        }
    }

    for (int b = 0; b < num_sbs; ++b) {
        const int k = m.cluster_of_sbs[static_cast<std::size_t>(b)];
        if (k < 0) continue;
        auto& pool = clusters[static_cast<std::size_t>(k)].pool;
        std::sort(pool.begin(), pool.end(), more_urgent);
        std::vector<matching::PoolChunk> chunks;
        // Only the head of the pool can be reached within one slot at the capped rate.
        const double max_bits = chan.mu_max() * slot_s;
        double reach = 0.0;
        for (const auto& e : pool) {
            matching::PoolChunk pc{e.frame, e.tile, e.urgency, e.users, {}};
            double owed = 0.0;
            for (int u : e.users) {
                const double r = users[static_cast<std::size_t>(u)].backlog.at({e.frame, e.tile}).remaining;
                pc.remaining.push_back(r);
                owed = std::max(owed, r);
            }
            chunks.push_back(std::move(pc));
            reach += owed;
            if (reach > max_bits) break;
        }
        const auto service = matching::settle_slot(chunks, rate, slot_s);
        bool touched = false;
        for (const auto& sv : service) {
            auto& entry = pool[sv.entry];
            for (int u : entry.users) {
                auto& us = users[static_cast<std::size_t>(u)];
                auto it = us.backlog.find({entry.frame, entry.tile});
                double x = std::min(sv.bits, it->second.remaining);
                const bool done = it->second.remaining - x <= kBitEps;
                if (done) x = it->second.remaining;
                us.served += x;
                total_delivered += x;
                it->second.remaining -= x;
                if (!done) continue;
                us.backlog.erase(it);
                auto [dit, fresh] = us.delivered.try_emplace(entry.frame, catalog.num_tiles());
                dit->second.insert(entry.tile);
                if (entry.frame == us.frame && !us.complete && us.fov.is_subset_of(dit->second)) {
                    us.complete = true;
                    us.t_complete = t;
                }
                touched = true;
            }
        }
        if (touched) {
            for (auto& e : pool)
                e.users.erase(std::remove_if(e.users.begin(), e.users.end(),
                                             [&](int u) {
                                                 return !users[static_cast<std::size_t>(u)].backlog.count({e.frame, e.tile});
                                             }),
                              e.users.end());
            pool.erase(std::remove_if(pool.begin(), pool.end(), [](const PoolEntry& e) { return e.users.empty(); }),
                       pool.end());
        }
    }

    // Violation state at the end of the slot, before any expiry.
    std::vector<bool> violated(static_cast<std::size_t>(nu), false);
    for (int u = 0; u < nu; ++u) {
        auto& us = users[static_cast<std::size_t>(u)];
        violated[static_cast<std::size_t>(u)] =
            !us.complete && lyapunov::mtp_slack(us.t_a, t, lyap.tau_mtp_ms, cfg.slot_ms) <= 0.0;
        if (violated[static_cast<std::size_t>(u)]) ++us.violation_slots;
    }

    if (t == clock.last_slot_of_frame(f)) {
        end_frame(f);
        if (f < last_frame) begin_frame(f + 1);
    }

    update_queues(f, violated);
    return true;
}

RunResult Simulator::Impl::finish() {
    while (step()) {
    }
    RunResult out;
    out.frames = records;
    out.report = record_metrics(records);
    auto& r = out.report;
    r.scheme = scheme_name(scheme);
    r.seed = seed;
    r.users = static_cast<int>(users.size());
    r.slots = total_slots;
    std::int64_t vslots = 0;
    double residual = 0.0;
    for (const auto& us : users) {
        vslots += us.violation_slots;
        for (const auto& [key, p] : us.backlog) residual += p.remaining;
    }
    r.violation_fraction =
        users.empty() || total_slots == 0 ? 0.0 : static_cast<double>(vslots) / (static_cast<double>(users.size()) * total_slots);
    r.prediction_jaccard = pred_j_count ? pred_j_sum / static_cast<double>(pred_j_count) : 0.0;
    r.bits_admitted = total_admitted;
    r.bits_delivered = total_delivered;
    r.bits_dropped = total_dropped;
    r.bits_residual = residual;
    if (cfg.check_invariants &&
        std::abs(total_admitted - total_delivered - total_dropped - residual) > 1e-9 * std::max(1.0, total_admitted) + 1e-3)
        ++inv.conservation_errors;
    r.drift_checks = drift_checks;
    r.invariants = inv;
    return out;
}

Simulator::Simulator(const SimConfig& cfg, Scheme scheme, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(cfg, scheme, seed)) {}
Simulator::~Simulator() = default;
bool Simulator::step() { return impl_->step(); }
RunResult Simulator::finish() { return impl_->finish(); }
std::int64_t Simulator::slot() const { return impl_->t; }
std::int64_t Simulator::total_slots() const { return impl_->total_slots; }
const InvariantCounters& Simulator::invariants() const { return impl_->inv; }
const scenario::TheaterLayout& Simulator::layout() const { return impl_->layout; }
const lyapunov::UserQueueState& Simulator::queue(int user) const { return impl_->users.at(static_cast<std::size_t>(user)).q; }
int Simulator::num_users() const { return static_cast<int>(impl_->users.size()); }

std::vector<std::vector<int>> Simulator::clusters() const {
    std::vector<std::vector<int>> out;
    for (const auto& c : impl_->clusters) out.push_back(c.members);
    return out;
}

RunResult run(const SimConfig& cfg, Scheme scheme, std::uint64_t seed) {
    Simulator s(cfg, scheme, seed);
    return s.finish();
}

void write_frames_csv(std::ostream& out, const std::vector<FrameRecord>& frames, const std::string& scheme) {
    out << "user,frame,scheme,t_request_ms,deadline_ms,delay_ms,hd_complete,jaccard_delivered,tiles_sent,tiles_fov\n";
    char buf[256];
    for (const auto& r : frames) {
        std::snprintf(buf, sizeof buf, "%d,%lld,%s,%.3f,%.3f,%.3f,%d,%.6f,%d,%d\n", r.user,
                      static_cast<long long>(r.frame), scheme.c_str(), r.t_request_ms, r.deadline_ms, r.delay_ms,
                      r.hd_complete ? 1 : 0, r.jaccard_delivered, r.tiles_sent, r.tiles_fov);
        out << buf;
    }
}

}  // namespace vrmcast::sim
