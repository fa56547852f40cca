#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gex/extreme_set.hpp"
#include "gex/simulate.hpp"

namespace gex {

struct TailProbability {
    double prob = 0.0;
    double frac_in_set = 0.0;     // P(Z in B | R' > k), Monte Carlo
    double p_k_given_1 = 1.0;     // P(R' > k | R' > 1), importance weights
    double p_rprime_gt_1 = 0.0;   // empirical P(R' > 1)
    std::size_t hits = 0;
    bool zero_hits_warning = false;
};

// Extrapolation decomposition P(Z in B) = P(Z in B | R'>k) P(R'>k | R'>1) P(R'>1)
// evaluated on a fresh simulated cloud.
TailProbability tail_probability(const GaugeParams& params, const ExceedanceSet& exceedances,
                                 const ExtremeSet& set, double k, std::size_t m_sim, Rng& rng);

// Same decomposition for ConsecutiveRun sets via temporal angular blocks.
// Each block is rescaled by r* / r_anchor with r* drawn above k r_tau.
TailProbability tail_probability_blocks(const GaugeParams& params,
                                        const Eigen::MatrixXd& exp_data, const ExtremeSet& set,
                                        double k, int block_len, std::size_t m_sim, Rng& rng);

// Block variant on a pre-enumerated (possibly resampled) anchor block list;
// p_rprime_gt_1 is supplied by the caller.
TailProbability tail_probability_from_blocks(const GaugeParams& params,
                                             const std::vector<AngularBlock>& blocks,
                                             double p_rprime_gt_1, const ExtremeSet& set, double k,
                                             std::size_t m_sim, Rng& rng);

// Inclusion-exclusion evaluation of P(at least m components exceed q) on the
// empirical sample; validation oracle for small d only (d <= 12).
double inclusion_exclusion_oracle(const Eigen::MatrixXd& sample, const Eigen::VectorXd& q, int m);

// Probability to expected count per run.
double ctq_frequency(double prob, long n_obs);

struct BootstrapSummary {
    double mean = 0.0;
    double median = 0.0;
    double lo = 0.0;  // percentile interval bounds
    double hi = 0.0;
    std::vector<double> replicates;
};

// Percentile bootstrap over `n_reps` replicates. The closure receives a
// with-replacement index resample of [0, data_size) and a per-replicate RNG;
// it must return the replicated statistic. Errors in more than 5% of
// replicates abort with a fit error.
BootstrapSummary bootstrap_ci(
    const std::function<double(const std::vector<std::size_t>&, Rng&)>& replicate,
    std::size_t data_size, int n_reps, double level, Rng& rng);

struct CtqEstimate {
    double point = 0.0;
    double bootstrap_mean = 0.0;
    double bootstrap_median = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double k_used = 1.0;
    bool k_warning = false;
    long n_obs = 0;
};

}  // namespace gex
