#include "gex/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "gex/ingest.hpp"
#include "gex/special.hpp"

namespace gex {

AngularPoint radial_angular(const Eigen::VectorXd& z, long t) {
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (z[j] < 0.0) throw validation_error("radial_angular: negative component");
    const double r = z.sum();
    if (r <= 0.0) throw validation_error("radial_angular: all-zero vector");
    AngularPoint p;
    p.r = r;
    p.w = z / r;
    p.t = t;
    return p;
}

Eigen::MatrixXd powexp_correlation(const Eigen::MatrixXd& distances, double phi, double kappa) {
    if (!(phi > 0.0)) throw validation_error("powexp_correlation: phi must be positive");
    if (!(kappa > 0.0 && kappa <= 2.0))
        throw validation_error("powexp_correlation: kappa must lie in (0,2]");
    const Eigen::Index d = distances.rows();
    Eigen::MatrixXd sigma(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        sigma(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double v = std::exp(-std::pow(distances(i, j) / phi, kappa));
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

CorrelationModel::CorrelationModel(const Eigen::MatrixXd& distances, double phi, double kappa)
    : phi_(phi), kappa_(kappa), sigma_(powexp_correlation(distances, phi, kappa)) {
    llt_.compute(sigma_);
    // kappa near 2 on regular grids yields near-singular Sigma; escalate jitter
    for (double jitter : {1e-10, 1e-8}) {
        if (llt_.info() == Eigen::Success) break;
        Eigen::MatrixXd jittered = sigma_;
        jittered.diagonal().array() += jitter;
        llt_.compute(jittered);
    }
    if (llt_.info() != Eigen::Success)
        throw numerical_error("powexp correlation matrix not positive definite (phi=" +
                              std::to_string(phi) + ", kappa=" + std::to_string(kappa) + ")");
}

double CorrelationModel::quad_form(const Eigen::VectorXd& v) const {
    return v.dot(llt_.solve(v));
}

double gauge(const Eigen::VectorXd& z, const CorrelationModel& corr, double gamma) {
    if (!(gamma > 0.0)) throw validation_error("gauge: gamma must be positive");
    if (z.size() != corr.dim()) throw validation_error("gauge: dimension mismatch");
    Eigen::VectorXd v(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        double zj = z[j];
        if (zj < 0.0) throw validation_error("gauge: negative component");
        if (zj == 0.0) zj = 1e-12;  // keep downstream logs finite
        v[j] = std::pow(zj, 1.0 / gamma);
    }
    const double q = corr.quad_form(v);
    const double g = std::pow(q, gamma / 2.0);
    if (!std::isfinite(g) || g <= 0.0) throw numerical_error("gauge: non-finite value");
    return g;
}

double c_tau_from_quantile(double shape, double tau) {
    return gamma_quantile(shape, tau);
}

double calibrate_c_tau(const std::vector<double>& radii, const std::vector<double>& gauge_values,
                       double tau) {
    if (radii.empty() || radii.size() != gauge_values.size())
        throw validation_error("calibrate_c_tau: empty or mismatched sample");
    if (!(tau > 0.0 && tau < 1.0)) throw validation_error("calibrate_c_tau: tau must lie in (0,1)");
    const std::size_t n = radii.size();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = radii[i] * gauge_values[i];
    // order statistic at ceil(tau*n): strict exceedance fraction is within 1/n of 1-tau
    std::size_t idx = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)));
    if (idx == 0) idx = 1;
    if (idx > n) idx = n;
    std::nth_element(s.begin(), s.begin() + (idx - 1), s.end());
    return s[idx - 1];
}

GaugeParams::GaugeParams(double lambda, double phi, double kappa, double gamma, double c_tau,
                         double tau, std::vector<Eigen::Vector2d> dplane_coords)
    : lambda_(lambda), phi_(phi), kappa_(kappa), gamma_(gamma), c_tau_(c_tau), tau_(tau),
      coords_(std::move(dplane_coords)) {
    if (!(lambda_ > 0.0)) throw validation_error("GaugeParams: lambda must be positive");
    if (!(gamma_ > 0.0)) throw validation_error("GaugeParams: gamma must be positive");
    if (!(c_tau_ > 0.0)) throw validation_error("GaugeParams: c_tau must be positive");
    if (!(tau_ > 0.0 && tau_ < 1.0)) throw validation_error("GaugeParams: tau must lie in (0,1)");
    if (coords_.size() < 2) throw validation_error("GaugeParams: need at least 2 sites");
    corr_ = std::make_shared<CorrelationModel>(pairwise_distances(coords_), phi_, kappa_);
}

}  // namespace gex
