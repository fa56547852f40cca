#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "gex/errors.hpp"

namespace gex {

// Radial-angular representation: r is the L1 radius, w lies on the simplex.
struct AngularPoint {
    double r = 0.0;
    Eigen::VectorXd w;
    long t = -1;  // originating day index, -1 if synthetic
};

AngularPoint radial_angular(const Eigen::VectorXd& z, long t = -1);

// Sigma_ij = exp(-(h_ij/phi)^kappa), unit diagonal.
Eigen::MatrixXd powexp_correlation(const Eigen::MatrixXd& distances, double phi, double kappa);

// Correlation matrix together with its Cholesky factorisation, built once
// per (phi, kappa) candidate and reused for every quadratic form.
class CorrelationModel {
public:
    CorrelationModel(const Eigen::MatrixXd& distances, double phi, double kappa);

    // Quadratic form v' Sigma^{-1} v.
    double quad_form(const Eigen::VectorXd& v) const;

    double phi() const { return phi_; }
    double kappa() const { return kappa_; }
    int dim() const { return static_cast<int>(sigma_.rows()); }
    const Eigen::MatrixXd& sigma() const { return sigma_; }

private:
    double phi_, kappa_;
    Eigen::MatrixXd sigma_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Generalised Gaussian gauge g(z) = [ (z^{1/gamma})' Sigma^{-1} z^{1/gamma} ]^{gamma/2}.
// Order-1 homogeneous; accepts any nonnegative z, not only simplex points.
double gauge(const Eigen::VectorXd& z, const CorrelationModel& corr, double gamma);

// tau-quantile of Gamma(shape, rate 1); the pre-calibration threshold constant.
double c_tau_from_quantile(double shape, double tau);

// Empirical tau-quantile of {r_i * g(w_i)}: the calibrated threshold constant.
double calibrate_c_tau(const std::vector<double>& radii, const std::vector<double>& gauge_values,
                       double tau);

// Fitted gauge parameters plus the threshold calibration. The threshold
// gauge is the standard Gaussian form (gamma = 2) with (phi, kappa); the
// generalised gamma enters only the radial density.
class GaugeParams {
public:
    GaugeParams(double lambda, double phi, double kappa, double gamma, double c_tau, double tau,
                std::vector<Eigen::Vector2d> dplane_coords);

    double lambda() const { return lambda_; }
    double phi() const { return phi_; }
    double kappa() const { return kappa_; }
    double gamma() const { return gamma_; }
    double c_tau() const { return c_tau_; }
    double tau() const { return tau_; }
    int dim() const { return static_cast<int>(coords_.size()); }
    double shape() const { return lambda_ * dim(); }
    const std::vector<Eigen::Vector2d>& dplane_coords() const { return coords_; }
    const CorrelationModel& correlation() const { return *corr_; }

    // Gauge at the fitted (phi, kappa, gamma).
    double gauge_value(const Eigen::VectorXd& w) const { return gauge(w, *corr_, gamma_); }
    // Gauge of the threshold stage (gamma fixed at 2).
    double threshold_gauge(const Eigen::VectorXd& w) const { return gauge(w, *corr_, 2.0); }
    // r_tau(w) = C_tau / g(w; phi, kappa) with the gamma = 2 gauge.
    double radial_threshold(const Eigen::VectorXd& w) const {
        return c_tau_ / threshold_gauge(w);
    }

private:
    double lambda_, phi_, kappa_, gamma_, c_tau_, tau_;
    std::vector<Eigen::Vector2d> coords_;
    std::shared_ptr<const CorrelationModel> corr_;
};

}  // namespace gex
