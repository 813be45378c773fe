#include "mflq/csv.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mflq::csv {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary keeps LF endings everywhere
    if (!out) throw Error("cannot open output file: " + path);
    return out;
}

void matrix_header(std::ostream& out, const std::string& prefix, Eigen::Index rows,
                   Eigen::Index cols) {
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out << ',' << prefix << i << j;
        }
    }
}

void vector_header(std::ostream& out, const std::string& prefix, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) {
        out << ',' << prefix << i;
    }
}

void matrix_row(std::ostream& out, const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << ',' << format17(m(i, j));
        }
    }
}

void vector_row(std::ostream& out, const VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << ',' << format17(v(i));
    }
}

nlohmann::json level_json(const LevelEntry& lv) {
    return {{"N", lv.steps},
            {"tau", lv.tau},
            {"error", lv.error},
            {"stderr", lv.standard_error},
            {"mc_limited", lv.mc_limited}};
}

} // namespace

std::string format17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", value);
    return buf;
}

void write_riccati(const std::string& path, const RiccatiSequence& seq,
                   const std::string& prefix) {
    std::ofstream out = open_out(path);
    const Eigen::Index n = seq.values.empty() ? 0 : seq.values.front().size();
    out << "k,t";
    matrix_header(out, prefix, n, n);
    out << '\n';
    for (int k = 0; k <= seq.mesh.steps; ++k) {
        out << k << ',' << format17(seq.mesh.t(k));
        matrix_row(out, seq.at(k));
        out << '\n';
    }
}

void write_gains(const std::string& path, const FeedbackPolicy& policy) {
    std::ofstream out = open_out(path);
    const Eigen::Index m = policy.K1.empty() ? 0 : policy.K1.front().rows();
    const Eigen::Index n = policy.K1.empty() ? 0 : policy.K1.front().cols();
    out << "k,t";
    matrix_header(out, "K1_", m, n);
    matrix_header(out, "K2_", m, n);
    out << '\n';
    for (int k = 0; k < policy.steps(); ++k) {
        out << k << ',' << format17(policy.mesh.t(k));
        matrix_row(out, policy.K1[static_cast<size_t>(k)]);
        matrix_row(out, policy.K2[static_cast<size_t>(k)]);
        out << '\n';
    }
}

void write_means(const std::string& path, const MeanTrajectory& means) {
    std::ofstream out = open_out(path);
    const Eigen::Index n = means.mean_x.front().size();
    const Eigen::Index m = means.mean_u.empty() ? 0 : means.mean_u.front().size();
    out << "k,t";
    vector_header(out, "mean_x", n);
    vector_header(out, "mean_u", m);
    out << '\n';
    for (int k = 0; k <= means.mesh.steps; ++k) {
        out << k << ',' << format17(means.mesh.t(k));
        vector_row(out, means.mean_x[static_cast<size_t>(k)]);
        if (k < means.mesh.steps) {
            vector_row(out, means.mean_u[static_cast<size_t>(k)]);
        } else {
            for (Eigen::Index i = 0; i < m; ++i) out << ',';
        }
        out << '\n';
    }
}

void write_moments(const std::string& path, const MomentSummary& summary) {
    std::ofstream out = open_out(path);
    const Eigen::Index n = summary.mean_x.front().size();
    const Eigen::Index m = summary.mean_u.empty() ? 0 : summary.mean_u.front().size();
    out << "k,t";
    vector_header(out, "Ex", n);
    out << ",Ex2";
    vector_header(out, "Eu", m);
    out << ",Eu2";
    vector_header(out, "se_Ex", n);
    out << ",se_Ex2";
    vector_header(out, "se_Eu", m);
    out << ",se_Eu2\n";
    for (int k = 0; k <= summary.mesh.steps; ++k) {
        const size_t i = static_cast<size_t>(k);
        const bool has_u = k < summary.mesh.steps;
        out << k << ',' << format17(summary.mesh.t(k));
        vector_row(out, summary.mean_x[i]);
        out << ',' << format17(summary.second_x[i]);
        if (has_u) {
            vector_row(out, summary.mean_u[i]);
            out << ',' << format17(summary.second_u[i]);
        } else {
            for (Eigen::Index c = 0; c <= m; ++c) out << ',';
        }
        vector_row(out, summary.se_mean_x[i]);
        out << ',' << format17(summary.se_second_x[i]);
        if (has_u) {
            vector_row(out, summary.se_mean_u[i]);
            out << ',' << format17(summary.se_second_u[i]);
        } else {
            for (Eigen::Index c = 0; c <= m; ++c) out << ',';
        }
        out << '\n';
    }
}

void write_paths(const std::string& path, const PathEnsemble& ensemble) {
    const size_t rows = ensemble.paths.size() * (static_cast<size_t>(ensemble.mesh.steps) + 1);
    if (rows > 1000000) {
        std::fprintf(stderr, "warning: paths export has %zu rows\n", rows);
    }
    std::ofstream out = open_out(path);
    const Eigen::Index n = ensemble.paths.front().x.front().size();
    const Eigen::Index m = ensemble.paths.front().u.empty()
                               ? 0
                               : ensemble.paths.front().u.front().size();
    out << "path,k,t";
    vector_header(out, "x", n);
    vector_header(out, "u", m);
    out << ",dw\n";
    for (size_t pid = 0; pid < ensemble.paths.size(); ++pid) {
        const PathResult& pr = ensemble.paths[pid];
        for (int k = 0; k <= ensemble.mesh.steps; ++k) {
            out << pid << ',' << k << ',' << format17(ensemble.mesh.t(k));
            vector_row(out, pr.x[static_cast<size_t>(k)]);
            if (k < ensemble.mesh.steps) {
                vector_row(out, pr.u[static_cast<size_t>(k)]);
                out << ',' << format17(ensemble.increments[pid][static_cast<size_t>(k)]);
            } else {
                for (Eigen::Index c = 0; c <= m; ++c) out << ',';
            }
            out << '\n';
        }
    }
}

void write_adjoint_means(const std::string& path, const AdjointMeans& means) {
    std::ofstream out = open_out(path);
    const Eigen::Index n = means.mean_y.front().size();
    out << "k,t";
    vector_header(out, "mean_y", n);
    vector_header(out, "mean_z", n);
    out << '\n';
    for (int k = 0; k < means.mesh.steps; ++k) {
        const size_t i = static_cast<size_t>(k);
        out << k << ',' << format17(means.mesh.t(k));
        vector_row(out, means.mean_y[i]);
        vector_row(out, means.mean_z[i]);
        out << '\n';
    }
}

void write_adjoint_paths(const std::string& path, std::span<const AdjointPath> paths) {
    std::ofstream out = open_out(path);
    const Eigen::Index n = paths.front().y.front().size();
    out << "path,k,t";
    vector_header(out, "y", n);
    vector_header(out, "z", n);
    vector_header(out, "mean_y", n);
    vector_header(out, "mean_z", n);
    out << '\n';
    for (size_t pid = 0; pid < paths.size(); ++pid) {
        const AdjointPath& ap = paths[pid];
        for (int k = 0; k < ap.mesh.steps; ++k) {
            const size_t i = static_cast<size_t>(k);
            out << pid << ',' << k << ',' << format17(ap.mesh.t(k));
            vector_row(out, ap.y[i]);
            vector_row(out, ap.z[i]);
            vector_row(out, ap.mean_y[i]);
            vector_row(out, ap.mean_z[i]);
            out << '\n';
        }
    }
}

void write_rates(const std::string& path, std::span<const RateReport> reports) {
    std::ofstream out = open_out(path);
    out << "metric,N,tau,error,stderr,flag\n";
    for (const RateReport& report : reports) {
        for (const LevelEntry& lv : report.levels) {
            out << report.metric << ',' << lv.steps << ',' << format17(lv.tau) << ','
                << format17(lv.error) << ',' << format17(lv.standard_error) << ','
                << (lv.mc_limited ? "mc-limited" : "ok") << '\n';
        }
    }
}

std::string rates_json(std::span<const RateReport> reports) {
    nlohmann::json doc = nlohmann::json::object();
    for (const RateReport& report : reports) {
        nlohmann::json entry;
        if (report.degenerate) {
            entry["slope"] = "degenerate";
        } else if (report.insufficient_levels) {
            entry["slope"] = "insufficient-levels";
        } else {
            entry["slope"] = report.slope;
            entry["slope_halfwidth"] = report.slope_halfwidth;
        }
        entry["fitted_levels"] = report.fitted_levels;
        entry["levels"] = nlohmann::json::array();
        for (const LevelEntry& lv : report.levels) entry["levels"].push_back(level_json(lv));
        doc[report.metric] = std::move(entry);
    }
    return doc.dump(2) + "\n";
}

std::string cost_json(const CostReport& report, int steps, int num_paths, std::uint64_t seed) {
    nlohmann::json doc = {{"J_tau", report.j_tau},
                          {"standard_error", report.standard_error},
                          {"terms",
                           {{"Q", report.terms.q},
                            {"Qbar", report.terms.qbar},
                            {"R", report.terms.r},
                            {"Rbar", report.terms.rbar},
                            {"G", report.terms.g},
                            {"Gbar", report.terms.gbar}}},
                          {"N", steps},
                          {"M", num_paths},
                          {"seed", seed}};
    return doc.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
}

} // namespace mflq::csv
