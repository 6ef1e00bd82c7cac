#include "vrmcast/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "vrmcast/errors.hpp"

namespace vrmcast::sweep {

SimConfig sweep_point(const SimConfig& base, const std::string& param, const nlohmann::json& value) {
    SimConfig c = base;
    if (param == "preset") {
        if (!value.is_string()) throw ConfigError("preset: expected a preset name");
        const SimConfig p = preset(value.get<std::string>());
        c.theater_rows = p.theater_rows;
        c.theater_cols = p.theater_cols;
        c.num_videos = p.num_videos;
        c.users_per_video = p.users_per_video;
        c.clusters_per_video = p.clusters_per_video;
    } else {
        c = apply_json(c, nlohmann::json{{param, value}});
    }
    c.validate();
    return c;
}

std::vector<SweepRow> run_sweep(const SimConfig& base, const SweepSpec& spec) {
    struct Job {
        std::size_t value;
        Scheme scheme;
        std::uint64_t seed;
    };
    std::vector<SimConfig> configs;
    for (const auto& v : spec.values) configs.push_back(sweep_point(base, spec.param, v));

    std::vector<Job> jobs;
    for (std::size_t i = 0; i < spec.values.size(); ++i)
        for (Scheme s : spec.schemes)
            for (auto seed : spec.seeds) jobs.push_back({i, s, seed});

    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            try {
                const auto& job = jobs[j];
                auto& row = rows[j];
                row.param = spec.param;
                row.value = spec.values[job.value].dump();
                row.scheme = scheme_name(job.scheme);
                row.seed = job.seed;
                row.report = sim::run(configs[job.value], job.scheme, job.seed).report;
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };

    unsigned n = spec.workers > 0 ? static_cast<unsigned>(spec.workers) : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return rows;
}

namespace {

const std::vector<std::string> kColumns{"param",        "value",          "scheme",           "seed",
                                        "users",        "frames",         "avg_delay_ms",     "p99_delay_ms",
                                        "hd_delivery_rate", "delivered_jaccard", "violation_fraction",
                                        "prediction_jaccard", "invariant_failures"};

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, int lineno) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cells.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cells.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.emplace_back();
        } else {
            cells.back() += ch;
        }
    }
    if (quoted) throw ParseError("unterminated quote", lineno);
    return cells;
}

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : rows) {
        const auto& m = r.report;
        out << csv_cell(r.param) << ',' << csv_cell(r.value) << ',' << csv_cell(r.scheme) << ',' << r.seed << ','
            << m.users << ',' << m.frames << ',' << fmt(m.avg_delay_ms) << ',' << fmt(m.p99_delay_ms) << ','
            << fmt(m.hd_delivery_rate) << ',' << fmt(m.delivered_jaccard) << ',' << fmt(m.violation_fraction) << ','
            << fmt(m.prediction_jaccard) << ',' << m.invariants.total() << '\n';
    }
}

int SweepTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing column '" + name + "'", 1);
    return static_cast<int>(it - header.begin());
}

SweepTable read_sweep_csv(std::istream& in) {
    SweepTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line, lineno);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " cells", lineno);
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw ParseError("empty sweep table", 1);
    return t;
}

const std::vector<std::string>& chart_metrics() {
    static const std::vector<std::string> m{"avg_delay_ms", "p99_delay_ms", "hd_delivery_rate", "delivered_jaccard"};
    return m;
}

std::string render_svg(const SweepTable& table, const std::string& metric) {
    const int c_value = table.column("value"), c_scheme = table.column("scheme"), c_metric = table.column(metric);
    const int c_param = table.column("param");

    // x positions: numeric values on a linear axis, anything else by first appearance
    std::vector<std::string> xs;
    for (const auto& r : table.rows)
        if (std::find(xs.begin(), xs.end(), r[static_cast<std::size_t>(c_value)]) == xs.end())
            xs.push_back(r[static_cast<std::size_t>(c_value)]);
    bool numeric = !xs.empty();
    std::vector<double> xnum;
    for (const auto& x : xs) {
        char* end = nullptr;
        const double v = std::strtod(x.c_str(), &end);
        if (end == x.c_str() || *end != '\0' || !std::isfinite(v)) numeric = false;
        xnum.push_back(v);
    }
    if (!numeric)
        for (std::size_t i = 0; i < xs.size(); ++i) xnum[i] = static_cast<double>(i);

    std::vector<std::string> schemes;
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
    for (const auto& r : table.rows) {
        const auto& s = r[static_cast<std::size_t>(c_scheme)];
        if (std::find(schemes.begin(), schemes.end(), s) == schemes.end()) schemes.push_back(s);
        auto& a = acc[{s, r[static_cast<std::size_t>(c_value)]}];
        a.first += std::strtod(r[static_cast<std::size_t>(c_metric)].c_str(), nullptr);
        ++a.second;
    }

    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    if (!xnum.empty()) {
        xlo = *std::min_element(xnum.begin(), xnum.end());
        xhi = *std::max_element(xnum.begin(), xnum.end());
    }
    bool first = true;
    for (const auto& [k, a] : acc) {
        const double m = a.first / a.second;
        if (first || m > yhi) yhi = m;
        first = false;
    }
    if (yhi <= ylo) yhi = ylo + 1;
    yhi *= 1.05;
    if (xhi <= xlo) {
        xlo -= 0.5;
        xhi += 0.5;
    }

    const double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream o;
    const std::string param = table.rows.empty() ? "" : table.rows.front()[static_cast<std::size_t>(c_param)];
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << metric << " vs " << param << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ylo + (yhi - ylo) * i / 4.0;
        o << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(y) + 4, "%.1f") << "\" text-anchor=\"end\">" << fmt(y, "%.3g")
          << "</text>\n";
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        o << "<text x=\"" << fmt(px(xnum[i]), "%.1f") << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xs[i]
          << "</text>\n";
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << param << "</text>\n";

    for (std::size_t s = 0; s < schemes.size(); ++s) {
        const char* color = colors[s % 6];
        std::string pts;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto it = acc.find({schemes[s], xs[i]});
            if (it == acc.end()) continue;
            const double m = it->second.first / it->second.second;
            pts += (pts.empty() ? "" : " ") + fmt(px(xnum[i]), "%.1f") + "," + fmt(py(m), "%.1f");
            o << "<circle cx=\"" << fmt(px(xnum[i]), "%.1f") << "\" cy=\"" << fmt(py(m), "%.1f") << "\" r=\"3\" fill=\""
              << color << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 35 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\">" << schemes[s] << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace vrmcast::sweep
