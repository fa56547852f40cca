#include "gex/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gex/nelder_mead.hpp"
#include "gex/rng.hpp"
#include "gex/special.hpp"

namespace gex {

namespace {

double tps_eta(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

bool collinear(const std::vector<Eigen::Vector2d>& pts) {
    if (pts.size() < 3) return true;
    for (std::size_t i = 2; i < pts.size(); ++i) {
        const Eigen::Vector2d a = pts[1] - pts[0];
        const Eigen::Vector2d b = pts[i] - pts[0];
        if (std::fabs(a.x() * b.y() - a.y() * b.x()) > 1e-9) return false;
    }
    return true;
}

struct TpsSolution {
    Eigen::Matrix<double, 2, 3> affine;
    Eigen::MatrixXd weights;  // m x 2
    double bending = 0.0;
};

// Interpolating thin-plate spline through (anchors -> targets) with the
// standard side conditions (weights orthogonal to 1, x, y).
TpsSolution tps_solve(const std::vector<Eigen::Vector2d>& anchors,
                      const std::vector<Eigen::Vector2d>& targets) {
    const int m = static_cast<int>(anchors.size());
    Eigen::MatrixXd K(m, m);
    for (int i = 0; i < m; ++i) {
        K(i, i) = 0.0;
        for (int j = i + 1; j < m; ++j) {
            const double v = tps_eta((anchors[i] - anchors[j]).norm());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 3, m + 3);
    A.topLeftCorner(m, m) = K;
    for (int i = 0; i < m; ++i) {
        A(i, m) = 1.0;
        A(i, m + 1) = anchors[i].x();
        A(i, m + 2) = anchors[i].y();
        A(m, i) = 1.0;
        A(m + 1, i) = anchors[i].x();
        A(m + 2, i) = anchors[i].y();
    }
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m + 3, 2);
    for (int i = 0; i < m; ++i) rhs.row(i) = targets[i].transpose();

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw numerical_error("tps_solve: singular spline system");
    const Eigen::MatrixXd sol = lu.solve(rhs);

    TpsSolution out;
    out.weights = sol.topRows(m);
    for (int dim = 0; dim < 2; ++dim)
        for (int c = 0; c < 3; ++c) out.affine(dim, c) = sol(m + c, dim);
    for (int dim = 0; dim < 2; ++dim)
        out.bending += out.weights.col(dim).dot(K * out.weights.col(dim));
    return out;
}

// Best (rho, alpha) for a fixed coordinate configuration.
std::pair<Eigen::Vector2d, double> fit_br_params(const std::vector<Eigen::Vector2d>& coords,
                                                 const ChiMatrix& chi_hat, double tol,
                                                 int max_iter) {
    const int d = static_cast<int>(coords.size());
    auto obj = [&](const Eigen::VectorXd& x) -> double {
        const double rho = std::exp(x[0]);
        const double alpha = 2.0 * sigmoid(x[1]);
        if (!std::isfinite(rho) || rho <= 0.0) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                const double diff =
                    br_chi((coords[i] - coords[j]).norm(), rho, alpha) - chi_hat.chi(i, j);
                s += diff * diff;
            }
        return s;
    };
    Eigen::VectorXd x0(2);
    x0 << 0.0, 0.0;  // rho = 1, alpha = 1
    NelderMeadOptions nm;
    nm.tol = tol;
    nm.max_iter = max_iter;
    const auto res = nelder_mead(obj, x0, nm);
    Eigen::Vector2d par(std::exp(res.x[0]), 2.0 * sigmoid(res.x[1]));
    return {par, res.fval};
}

}  // namespace

ChiMatrix empirical_chi_matrix(const Eigen::MatrixXd& exp_data, double u) {
    const long n = exp_data.rows();
    const int d = static_cast<int>(exp_data.cols());
    if (!(u > 0.0 && u < 1.0)) throw validation_error("empirical_chi_matrix: u must lie in (0,1)");
    const double expected = static_cast<double>(n) * (1.0 - u);
    if (expected < 20.0)
        throw validation_error("empirical_chi_matrix: fewer than 20 expected joint exceedances");

    // per-column u-quantile thresholds (order statistic at ceil(u n))
    std::vector<double> thr(d);
    std::vector<double> col(n);
    std::size_t idx = static_cast<std::size_t>(std::ceil(u * static_cast<double>(n)));
    idx = std::min(std::max<std::size_t>(idx, 1), static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        for (long t = 0; t < n; ++t) col[t] = exp_data(t, j);
        std::nth_element(col.begin(), col.begin() + (idx - 1), col.end());
        thr[j] = col[idx - 1];
    }

    ChiMatrix out;
    out.u = u;
    out.chi = Eigen::MatrixXd::Ones(d, d);
    out.pair_counts = Eigen::MatrixXi::Zero(d, d);
    std::vector<std::vector<int>> exceed_idx(d);
    for (int j = 0; j < d; ++j)
        for (long t = 0; t < n; ++t)
            if (exp_data(t, j) > thr[j]) exceed_idx[j].push_back(static_cast<int>(t));

    std::vector<char> mark(n, 0);
    for (int i = 0; i < d; ++i) {
        for (int t : exceed_idx[i]) mark[t] = 1;
        out.pair_counts(i, i) = static_cast<int>(exceed_idx[i].size());
        for (int j = i + 1; j < d; ++j) {
            int cnt = 0;
            for (int t : exceed_idx[j]) cnt += mark[t];
            out.pair_counts(i, j) = cnt;
            out.pair_counts(j, i) = cnt;
            const double chi = std::clamp(static_cast<double>(cnt) / expected, 0.0, 1.0);
            out.chi(i, j) = chi;
            out.chi(j, i) = chi;
        }
        for (int t : exceed_idx[i]) mark[t] = 0;
    }
    return out;
}

double br_chi(double h, double rho, double alpha) {
    if (h < 0.0 || !(rho > 0.0) || !(alpha > 0.0 && alpha <= 2.0))
        throw validation_error("br_chi: invalid arguments");
    return 2.0 - 2.0 * norm_cdf(std::sqrt(std::pow(h / rho, alpha)) / 2.0);
}

std::vector<int> default_anchor_indices(int n_sites) {
    const int m = std::max(4, static_cast<int>(std::lround(n_sites / 4.0)));
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
        idx.push_back(static_cast<int>(std::lround(i * (n_sites - 1) / static_cast<double>(m - 1))));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

std::vector<Eigen::Vector2d> apply_deformation(const Deformation& def,
                                               const std::vector<Eigen::Vector2d>& coords) {
    const int m = static_cast<int>(def.anchors.size());
    std::vector<Eigen::Vector2d> out;
    out.reserve(coords.size());
    for (const auto& s : coords) {
        Eigen::Vector2d p;
        for (int dim = 0; dim < 2; ++dim) {
            double v = def.affine(dim, 0) + def.affine(dim, 1) * s.x() + def.affine(dim, 2) * s.y();
            for (int k = 0; k < m; ++k)
                v += def.spline_weights(k, dim) * tps_eta((s - def.anchors[k]).norm());
            p[dim] = v;
        }
        if (!p.allFinite()) throw numerical_error("apply_deformation: non-finite image");
        out.push_back(p);
    }
    return out;
}

Deformation fit_deformation(const std::vector<Eigen::Vector2d>& coords, const ChiMatrix& chi_hat,
                            const std::vector<int>& anchor_indices, const DeformOptions& opts) {
    const int d = static_cast<int>(coords.size());
    if (chi_hat.chi.rows() != d) throw validation_error("fit_deformation: chi matrix size mismatch");
    if (anchor_indices.size() < 3)
        throw validation_error("fit_deformation: need at least 3 anchors");
    std::vector<Eigen::Vector2d> anchors;
    for (int idx : anchor_indices) {
        if (idx < 0 || idx >= d) throw validation_error("fit_deformation: anchor index out of range");
        anchors.push_back(coords[idx]);
    }
    if (collinear(anchors)) throw validation_error("fit_deformation: anchors are collinear");
    const int m = static_cast<int>(anchors.size());

    // x = [target coordinates (2m), log rho, logit(alpha/2)]
    auto decode_targets = [&](const Eigen::VectorXd& x) {
        std::vector<Eigen::Vector2d> targets(m);
        for (int k = 0; k < m; ++k) targets[k] = Eigen::Vector2d(x[2 * k], x[2 * k + 1]);
        return targets;
    };
    auto objective = [&](const Eigen::VectorXd& x) -> double {
        const double rho = std::exp(x[2 * m]);
        const double alpha = 2.0 * sigmoid(x[2 * m + 1]);
        if (!std::isfinite(rho) || rho <= 0.0) return std::numeric_limits<double>::infinity();
        try {
            const auto targets = decode_targets(x);
            const auto tps = tps_solve(anchors, targets);
            Deformation def;
            def.anchors = anchors;
            def.affine = tps.affine;
            def.spline_weights = tps.weights;
            const auto mapped = apply_deformation(def, coords);
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j) {
                    const double h = (mapped[i] - mapped[j]).norm();
                    if (h < 1e-6) return std::numeric_limits<double>::infinity();  // collapsed map
                    const double diff = br_chi(h, rho, alpha) - chi_hat.chi(i, j);
                    s += diff * diff;
                }
            return s + opts.bending_weight * tps.bending;
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    // identity-map baseline with its best (rho, alpha)
    const auto [br0, identity_obj] =
        fit_br_params(coords, chi_hat, opts.tol, opts.max_iter);

    Eigen::VectorXd x0(2 * m + 2);
    for (int k = 0; k < m; ++k) {
        x0[2 * k] = anchors[k].x();
        x0[2 * k + 1] = anchors[k].y();
    }
    x0[2 * m] = std::log(br0[0]);
    x0[2 * m + 1] = std::log(br0[1] / (2.0 - br0[1]));

    double span = 0.0;
    for (const auto& a : coords)
        for (const auto& b : coords) span = std::max(span, (a - b).norm());

    Rng rng(opts.seed);
    std::vector<Eigen::VectorXd> starts{x0};
    for (int s = 0; s < opts.multistarts; ++s) {
        Eigen::VectorXd x = x0;
        for (int k = 0; k < 2 * m; ++k) x[k] += 0.1 * span * (2.0 * rng.uniform() - 1.0);
        starts.push_back(std::move(x));
    }

    NelderMeadResult best;
    bool have = false;
    for (const auto& start : starts) {
        NelderMeadOptions nm;
        nm.tol = opts.tol;
        nm.max_iter = opts.max_iter;
        nm.initial_step = 0.05 * std::max(span, 1.0);
        const auto res = nelder_mead(objective, start, nm);
        if (!std::isfinite(res.fval)) continue;
        if (!have || res.fval < best.fval) {
            best = res;
            have = true;
        }
    }
    if (!have) throw fit_error("fit_deformation: all starts failed");

    const auto targets = decode_targets(best.x);
    const auto tps = tps_solve(anchors, targets);
    Deformation def;
    def.anchors = anchors;
    def.affine = tps.affine;
    def.spline_weights = tps.weights;
    def.br_rho = std::exp(best.x[2 * m]);
    def.br_alpha = 2.0 * sigmoid(best.x[2 * m + 1]);
    def.objective = best.fval;
    def.identity_objective = identity_obj;

    const auto mapped = apply_deformation(def, coords);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if ((mapped[i] - mapped[j]).norm() < 1e-6)
                throw fit_error("fit_deformation: degenerate map, two sites collapsed");
    return def;
}

}  // namespace gex
