#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gex/geometry.hpp"

namespace gex {

// Radial-angular threshold exceedances together with the (fixed) per-point
// thresholds under which they were selected.
struct ExceedanceSet {
    std::vector<AngularPoint> points;
    std::vector<double> thresholds;  // r_tau(w_i) at selection time
    int d = 0;
    std::size_t n_total = 0;
};

// Selects rows of exp_data with r > r_tau(w) under the given parameters.
ExceedanceSet make_exceedance_set(const Eigen::MatrixXd& exp_data, const GaugeParams& params);

struct PairwiseFit {
    double phi = 0.0;
    double kappa = 0.0;
    double c_tau = 0.0;   // d-dimensional calibration under (phi, kappa), gamma = 2
    double loglik = 0.0;  // attained objective (negative residual sum of squares)
    int iterations = 0;
    bool converged = false;
    bool kappa_at_boundary = false;
};

struct FitOptions {
    double tol = 1e-8;
    int max_iter = 5000;
    int multistarts = 3;          // additional jittered starts
    double jitter = 0.2;          // multiplicative jitter on the init
    std::uint64_t seed = 0;
    std::vector<double>* trace = nullptr;  // loglik trace of the default start
};

// Stage 1: shared (phi, kappa) of the gamma = 2 gauge fitted across all site
// pairs by least squares on each pair's empirical angular quantile surface
// (per-pair threshold constant profiled out); then the d-dimensional C_tau
// calibration.
PairwiseFit fit_pairwise(const Eigen::MatrixXd& exp_data,
                         const std::vector<Eigen::Vector2d>& dplane_coords, double tau,
                         const FitOptions& opts = {});

// Truncated-gamma log-likelihood of the exceedances at the candidate
// parameters. The GaugeParams form derives each truncation threshold from
// the candidate (phi, kappa, C_tau); the explicit form uses the thresholds
// stored in the exceedance set. Returns -inf if any point sits at or below
// its threshold or a term is non-finite.
double tg_loglik(const GaugeParams& params, const ExceedanceSet& exceedances);
double tg_loglik(double lambda, double gamma, const CorrelationModel& corr,
                 const ExceedanceSet& exceedances);

struct FittedGeometricModel {
    GaugeParams params;
    double loglik = 0.0;
    int iterations = 0;
    double simplex_spread = 0.0;
    bool converged = false;
    int run_id = 0;
};

// Stage 2: full maximum likelihood for (lambda, phi, kappa, gamma) on
// unconstrained transformed scales, best of default start plus multistarts.
FittedGeometricModel fit_truncated_gamma(const ExceedanceSet& exceedances,
                                         const std::vector<Eigen::Vector2d>& dplane_coords,
                                         const PairwiseFit& init, double tau,
                                         const FitOptions& opts = {});

// Recalibrates C_tau under the stage-2 (phi, kappa) so the exceedance
// fraction over exp_data is again 1 - tau, and returns the model with the
// exceedance set rebuilt under the final parameters.
std::pair<FittedGeometricModel, ExceedanceSet> finalize_model(const Eigen::MatrixXd& exp_data,
                                                              const FittedGeometricModel& fitted);

}  // namespace gex
