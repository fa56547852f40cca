#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gex/deform.hpp"
#include "gex/estimate.hpp"

namespace gex {

enum class DiagnosticKind { PP, QQ, CHI };

// Plot-ready diagnostic point set. Bands, when present, are pointwise 95%
// bounds; raw retains unclamped values where y is clamped for reporting.
struct DiagnosticSeries {
    DiagnosticKind kind = DiagnosticKind::PP;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band_lo;
    std::vector<double> band_hi;
    std::vector<double> raw;
    double level = 0.0;  // tau for PP/QQ, u for CHI
    int run_id = 0;
};

// Conditional probability integral transform of an exceedance radius:
// 1 - Q(a, g r) / Q(a, g r_tau), evaluated in log space.
double pit_value(const AngularPoint& point, double threshold, const GaugeParams& params);

// PP points {(i/(n~+1), u ascending)} with nonparametric bootstrap bands over
// order statistics (n_reps resamples, pointwise 2.5/97.5 percentiles).
DiagnosticSeries pp_points(const ExceedanceSet& exceedances, const GaugeParams& params,
                           int n_reps, Rng& rng);

// PP construction with both axes mapped through -log(1 - .).
DiagnosticSeries qq_points(const ExceedanceSet& exceedances, const GaugeParams& params,
                           int n_reps, Rng& rng);

// Model-based pairwise chi(u) on a shared simulated cloud at k = 1: for each
// site pair, the joint exceedance of -log(1-u) divided by (1-u). x carries
// the supplied pairwise distances (upper triangle, row-major i < j), y the
// clamped chi, raw the unclamped estimate.
DiagnosticSeries model_chi(const GaugeParams& params, const ExceedanceSet& exceedances, double u,
                           const Eigen::MatrixXd& distances, std::size_t m_sim, Rng& rng);

// Empirical chi matrix flattened to a series against the same distances.
DiagnosticSeries chi_series(const ChiMatrix& chi, const Eigen::MatrixXd& distances);

// Averages a chi series into n_bins equal-count bins by distance.
DiagnosticSeries bin_chi(const DiagnosticSeries& series, int n_bins = 15);

void save_series_csv(const DiagnosticSeries& series, const std::string& path);

}  // namespace gex
