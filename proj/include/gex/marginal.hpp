#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gex/ingest.hpp"

namespace gex {

struct CovariateConfig {
    int harmonics = 2;  // annual harmonic orders 1..H
    int lags = 3;       // previous-day raw values at the same site
};

// Design matrix for the usable days of one site's series. Columns:
// intercept, scaled linear trend, (cos, sin) pairs, lagged raw values.
// The first `lags` days are dropped (lags undefined there).
struct CovariateMatrix {
    Eigen::MatrixXd X;       // n_use x p
    std::vector<long> days;  // day index per row
    long first_row = 0;      // dataset row of the first usable day
};

CovariateMatrix build_covariates(const GridDataset& ds, int site,
                                 const CovariateConfig& cfg = {});

struct LocationScaleFit {
    Eigen::VectorXd mu_coeffs;
    Eigen::VectorXd log_sigma_coeffs;
    double fit_loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;  // scale pinned at its lower bound
};

// Gaussian MLE of Y = mu(x) + sigma(x) Z with log-linear sigma.
LocationScaleFit fit_location_scale(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

// (y - mu(x)) / sigma(x) rowwise.
Eigen::VectorXd standardize(const Eigen::VectorXd& y, const LocationScaleFit& fit,
                            const Eigen::MatrixXd& X);

struct GpdFit {
    double threshold = 0.0;       // empirical quantile of the standardized series
    double quantile_level = 0.8;
    Eigen::VectorXd psi_coeffs;   // log-linear scale
    double xi = 0.0;              // constant shape
    double loglik = 0.0;
    long n_exceed = 0;
    bool converged = false;
};

// GPD MLE on excesses of the threshold, log-linear psi, constant xi.
GpdFit fit_gpd(const Eigen::VectorXd& z, const Eigen::MatrixXd& X, double quantile_level = 0.80);

// One site's complete marginal fit plus the rank table.
struct SiteMarginal {
    LocationScaleFit ls;
    GpdFit gpd;
    CovariateMatrix cov;
    Eigen::VectorXd y;             // raw usable series
    Eigen::VectorXd z;             // standardized usable series
    std::vector<double> sorted_z;
    double phi_u = 0.0;            // (count <= threshold) / (n + 1)
    long n = 0;

    double psi_at(long row) const;  // GPD scale at covariate row
};

struct MarginalModel {
    std::vector<SiteMarginal> sites;
    long n_usable = 0;
};

MarginalModel fit_marginal_model(const GridDataset& ds, const CovariateConfig& cfg = {},
                                 double quantile_level = 0.80, bool preprocess = true,
                                 int threads = 0);

// Rank transform below the threshold, spliced GPD tail above. Strictly in (0,1).
double semiparametric_cdf(double z, long row, int site, const MarginalModel& model);

// -log(1 - u); domain error outside (0,1).
double to_exponential(double u);

// Nearest-observation conversion of a raw-scale threshold to the
// exponential scale. `extrapolated` is set when the value lies beyond the
// observed range and the GPD tail branch is used directly.
double leadbetter_to_exponential(double threshold_raw, int site, const MarginalModel& model,
                                 bool* extrapolated = nullptr);

// Full dataset mapped through the semiparametric CDF and the exponential
// transform; rows are the usable days.
Eigen::MatrixXd to_exponential_matrix(const MarginalModel& model);

}  // namespace gex
