#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gex/extreme_set.hpp"
#include "gex/fit.hpp"
#include "gex/rng.hpp"

namespace gex {

// Importance weight for re-weighting W | R' > 1 samples towards W | R' > k:
// ratio of gamma survivals at k r_tau(w) and r_tau(w), evaluated in log space.
double importance_weight(const Eigen::VectorXd& w, double k, const GaugeParams& params);

// P(R' > k | R' > 1) as the mean importance weight over exceedance angles.
double estimate_p_rprime_gt_k(const ExceedanceSet& exceedances, double k,
                              const GaugeParams& params);

// Resamples exceedance angles with probability proportional to IW(w; k).
// Returns indices into the exceedance list.
std::vector<std::size_t> sample_angle_indices(const ExceedanceSet& exceedances, double k,
                                              std::size_t m, Rng& rng,
                                              const GaugeParams& params);

// Inverse-CDF draw from the truncated gamma R | [W = w, R > k r_tau(w)].
double sample_radius(const Eigen::VectorXd& w, double k, const GaugeParams& params, Rng& rng);

struct SimulatedCloud {
    Eigen::MatrixXd points;            // m x d, each row r* w*
    double k = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> weights_used;  // IW of the resampled angle, per point
};

SimulatedCloud simulate_cloud(const GaugeParams& params, const ExceedanceSet& exceedances,
                              double k, std::size_t m, Rng& rng);

struct KGrid {
    double lo = 1.0;
    double hi = 4.0;
    double step = 0.01;
};

// Largest k on the grid for which no scaled non-exceedance k z lies in B.
// Returns 1 (with *warning set) if even k = 1 admits one.
double select_k(const Eigen::MatrixXd& non_exceedances, const ExtremeSet& set,
                const KGrid& grid = {}, bool* warning = nullptr);

// Rows of exp_data whose radius does not exceed the threshold.
Eigen::MatrixXd non_exceedance_rows(const Eigen::MatrixXd& exp_data, const GaugeParams& params);

// Temporal block of observed angular structure anchored at a day with R' > 1.
struct AngularBlock {
    long anchor_t = 0;         // row index of the anchor day
    Eigen::MatrixXd days;      // block_len x d observed exponential-scale vectors
    double anchor_r = 0.0;     // observed radius of the anchor day
    double weight = 0.0;       // IW of the anchor angle at level k
};

// All eligible blocks: anchors with R' > 1 and a full block within the
// series, each carrying its IW(anchor angle; k).
std::vector<AngularBlock> enumerate_blocks(const Eigen::MatrixXd& exp_data, double k,
                                           int block_len, const GaugeParams& params);

// Samples anchors (days with R' > 1 and a full block ahead) with probability
// proportional to IW(anchor angle; k); each block carries the observed
// consecutive day vectors starting at the anchor.
std::vector<AngularBlock> sample_blocks(const Eigen::MatrixXd& exp_data, double k, int block_len,
                                        std::size_t m, Rng& rng, const GaugeParams& params);

}  // namespace gex
