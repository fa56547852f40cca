#pragma once

#include <Eigen/Dense>

#include "gex/errors.hpp"

namespace gex {

enum class ExtremeSetKind { AllExceed, AtLeastM, ConsecutiveRun };

// Declarative target event region with per-site exponential-scale thresholds.
struct ExtremeSet {
    ExtremeSetKind kind = ExtremeSetKind::AllExceed;
    Eigen::VectorXd q;  // per-site thresholds, all > 0
    int m = 1;          // minimum site count (AtLeastM, ConsecutiveRun)
    int run_len = 1;    // consecutive days (ConsecutiveRun)
};

void validate_extreme_set(const ExtremeSet& set, int d);

// Single-day membership. ConsecutiveRun requires a block; passing a vector
// is a domain error.
bool membership(const Eigen::VectorXd& z, const ExtremeSet& set);

// Block membership: rows are consecutive days. For ConsecutiveRun, true if
// some window of run_len days has >= m sites exceeding on every day of the
// window.
bool membership(const Eigen::MatrixXd& block, const ExtremeSet& set);

}  // namespace gex
