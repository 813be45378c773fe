#include "mflq/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace mflq {

MatrixXd symmetrize(const MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

bool is_symmetric_within_tol(const MatrixXd& m) {
    if (m.rows() != m.cols()) return false;
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    return asym <= kSymmetryTol * scale;
}

double spectral_norm(const MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    const MatrixXd gram = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(gram), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double min_eigenvalue(const MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sym), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const MatrixXd& sym) {
    return min_eigenvalue(sym) >= -kPsdTol * (1.0 + spectral_norm(sym));
}

bool is_pd(const MatrixXd& sym) {
    return min_eigenvalue(sym) >= kPdTol;
}

SymMatrix::SymMatrix(const MatrixXd& raw) {
    if (raw.rows() != raw.cols()) {
        throw ShapeMismatch("SymMatrix requires a square matrix");
    }
    m_ = symmetrize(raw);
}

int TimeMesh::index_of(double time) const {
    const int k = static_cast<int>(std::floor(time / tau()));
    return std::clamp(k, 0, steps - 1);
}

TimeMesh make_mesh(int steps, double horizon) {
    if (steps < 1) throw DomainError("mesh needs at least one step");
    if (!(horizon > 0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive and finite");
    TimeMesh mesh{steps, horizon};
    if (mesh.tau() > 1.0) throw DomainError("step size tau must be <= 1");
    return mesh;
}

bool is_nested(const TimeMesh& coarse, const TimeMesh& fine) {
    return coarse.horizon == fine.horizon && coarse.steps >= 1 &&
           fine.steps % coarse.steps == 0;
}

ProblemData zero_problem(int n, int m, double T) {
    if (n < 1 || m < 1) throw ShapeMismatch("dimensions must be positive");
    ProblemData p;
    p.n = n;
    p.m = m;
    p.T = T;
    p.x0 = VectorXd::Zero(n);
    p.A = p.Abar = p.C = p.Cbar = p.Q = p.Qbar = p.G = p.Gbar = MatrixXd::Zero(n, n);
    p.B = p.Bbar = p.D = p.Dbar = MatrixXd::Zero(n, m);
    p.R = p.Rbar = MatrixXd::Zero(m, m);
    return p;
}

const ConditionCheck* ValidationReport::first_failure() const {
    for (const auto& c : conditions) {
        if (!c.pass) return &c;
    }
    return nullptr;
}

namespace {

void check_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << name << " must be " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        throw ShapeMismatch(os.str());
    }
}

void check_finite(const MatrixXd& m, const char* name) {
    if (!m.allFinite()) throw NonFinite(std::string(name) + " contains a non-finite entry");
}

void check_symmetric(const MatrixXd& m, const char* name) {
    if (!is_symmetric_within_tol(m)) {
        const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
        throw AssumptionViolated(std::string(name) + " is not symmetric within tolerance", asym);
    }
}

ConditionCheck psd_check(const MatrixXd& sym, std::string name) {
    const double eig = min_eigenvalue(sym);
    const bool pass = eig >= -kPsdTol * (1.0 + spectral_norm(sym));
    return {std::move(name), eig, pass};
}

ConditionCheck pd_check(const MatrixXd& sym, std::string name) {
    const double eig = min_eigenvalue(sym);
    return {std::move(name), eig, eig >= kPdTol};
}

} // namespace

ValidationReport validate_problem(const ProblemData& p) {
    if (p.n < 1 || p.m < 1) throw ShapeMismatch("dimensions n, m must be positive");
    if (!(p.T > 0) || !std::isfinite(p.T)) throw DomainError("horizon T must be positive and finite");
    if (p.x0.size() != p.n) throw ShapeMismatch("x0 must have length n");

    using Named = std::pair<const MatrixXd*, const char*>;
    const Named nn[] = {{&p.A, "A"}, {&p.Abar, "Abar"}, {&p.C, "C"}, {&p.Cbar, "Cbar"},
                        {&p.Q, "Q"}, {&p.Qbar, "Qbar"}, {&p.G, "G"}, {&p.Gbar, "Gbar"}};
    for (const auto& [m, name] : nn) {
        check_shape(*m, p.n, p.n, name);
        check_finite(*m, name);
    }
    const Named nm[] = {{&p.B, "B"}, {&p.Bbar, "Bbar"}, {&p.D, "D"}, {&p.Dbar, "Dbar"}};
    for (const auto& [m, name] : nm) {
        check_shape(*m, p.n, p.m, name);
        check_finite(*m, name);
    }
    const Named mm[] = {{&p.R, "R"}, {&p.Rbar, "Rbar"}};
    for (const auto& [m, name] : mm) {
        check_shape(*m, p.m, p.m, name);
        check_finite(*m, name);
    }
    check_finite(p.x0, "x0");

    const Named weights[] = {{&p.Q, "Q"}, {&p.Qbar, "Qbar"}, {&p.G, "G"},
                             {&p.Gbar, "Gbar"}, {&p.R, "R"}, {&p.Rbar, "Rbar"}};
    for (const auto& [m, name] : weights) {
        check_symmetric(*m, name);
    }

    ValidationReport report;
    report.conditions.push_back(psd_check(symmetrize(p.Q), "Q >= 0"));
    report.conditions.push_back(psd_check(symmetrize(p.Q + p.Qbar), "Q+Qbar >= 0"));
    report.conditions.push_back(psd_check(symmetrize(p.G), "G >= 0"));
    report.conditions.push_back(psd_check(symmetrize(p.G + p.Gbar), "G+Gbar >= 0"));
    report.conditions.push_back(pd_check(symmetrize(p.R), "R > 0"));
    report.conditions.push_back(pd_check(symmetrize(p.R + p.Rbar), "R+Rbar > 0"));
    report.pass = true;
    for (const auto& c : report.conditions) report.pass = report.pass && c.pass;
    return report;
}

void require_valid(const ProblemData& p) {
    const ValidationReport report = validate_problem(p);
    if (const ConditionCheck* fail = report.first_failure()) {
        throw AssumptionViolated(fail->name, fail->min_eigenvalue);
    }
}

HatCoefficients hat_transform(const ProblemData& p) {
    HatCoefficients hat;
    hat.A = p.A + p.Abar;
    hat.B = p.B + p.Bbar;
    hat.C = p.C + p.Cbar;
    hat.D = p.D + p.Dbar;
    hat.Q = symmetrize(p.Q + p.Qbar);
    hat.R = symmetrize(p.R + p.Rbar);
    hat.G = symmetrize(p.G + p.Gbar);
    return hat;
}

MatrixXd spd_solve(const MatrixXd& W, const MatrixXd& H) {
    if (W.rows() != W.cols()) throw ShapeMismatch("spd_solve: W must be square");
    if (H.rows() != W.rows()) throw ShapeMismatch("spd_solve: H row count must match W");

    const MatrixXd Ws = symmetrize(W);
    Eigen::LLT<MatrixXd> llt(Ws);
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("spd_solve: Cholesky factorization failed");
    }
    MatrixXd X = llt.solve(H);
    // One refinement step keeps the residual at the contract level even for
    // moderately conditioned W.
    X += llt.solve(H - Ws * X);
    return X;
}

namespace {

using nlohmann::json;

MatrixXd matrix_from_json(const json& doc, const std::string& key,
                          Eigen::Index rows, Eigen::Index cols) {
    if (!doc.contains(key)) return MatrixXd::Zero(rows, cols);
    const json& arr = doc.at(key);
    if (!arr.is_array() || arr.size() != static_cast<size_t>(rows * cols)) {
        std::ostringstream os;
        os << "\"" << key << "\" must be a row-major array of " << rows * cols << " numbers";
        throw ParseError(os.str(), key);
    }
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const json& v = arr[static_cast<size_t>(i * cols + j)];
            if (!v.is_number()) throw ParseError("\"" + key + "\" has a non-numeric entry", key);
            m(i, j) = v.get<double>();
        }
    }
    return m;
}

} // namespace

ProblemData parse_problem_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("problem file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("problem file must be a JSON object");

    for (const char* key : {"n", "m"}) {
        if (!doc.contains(key) || !doc.at(key).is_number_integer()) {
            throw ParseError(std::string("\"") + key + "\" must be an integer", key);
        }
    }
    const int n = doc.at("n").get<int>();
    const int m = doc.at("m").get<int>();
    if (n < 1 || m < 1) throw ParseError("dimensions \"n\" and \"m\" must be positive", n < 1 ? "n" : "m");

    if (!doc.contains("T") || !doc.at("T").is_number()) throw ParseError("\"T\" must be a number", "T");

    ProblemData p = zero_problem(n, m, doc.at("T").get<double>());

    if (!doc.contains("x0") || !doc.at("x0").is_array() ||
        doc.at("x0").size() != static_cast<size_t>(n)) {
        throw ParseError("\"x0\" must be an array of length n", "x0");
    }
    for (int i = 0; i < n; ++i) {
        const json& v = doc.at("x0")[static_cast<size_t>(i)];
        if (!v.is_number()) throw ParseError("\"x0\" has a non-numeric entry", "x0");
        p.x0(i) = v.get<double>();
    }

    p.A = matrix_from_json(doc, "A", n, n);
    p.Abar = matrix_from_json(doc, "Abar", n, n);
    p.B = matrix_from_json(doc, "B", n, m);
    p.Bbar = matrix_from_json(doc, "Bbar", n, m);
    p.C = matrix_from_json(doc, "C", n, n);
    p.Cbar = matrix_from_json(doc, "Cbar", n, n);
    p.D = matrix_from_json(doc, "D", n, m);
    p.Dbar = matrix_from_json(doc, "Dbar", n, m);
    p.Q = matrix_from_json(doc, "Q", n, n);
    p.Qbar = matrix_from_json(doc, "Qbar", n, n);
    p.R = matrix_from_json(doc, "R", m, m);
    p.Rbar = matrix_from_json(doc, "Rbar", m, m);
    p.G = matrix_from_json(doc, "G", n, n);
    p.Gbar = matrix_from_json(doc, "Gbar", n, n);
    return p;
}

ProblemData load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem_json(buf.str());
}

} // namespace mflq
