#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gex/errors.hpp"

namespace gex {

// Pairwise tail dependence estimates at level u.
struct ChiMatrix {
    double u = 0.0;
    Eigen::MatrixXd chi;          // d x d, symmetric, unit diagonal, in [0,1]
    Eigen::MatrixXi pair_counts;  // joint strict exceedance counts
};

// chi_hat(i,j) = #{t: both sites exceed their u-quantile} / (n (1-u)), clamped.
ChiMatrix empirical_chi_matrix(const Eigen::MatrixXd& exp_data, double u);

// Brown-Resnick bivariate tail dependence: 2 - 2 Phi(sqrt((h/rho)^alpha) / 2).
double br_chi(double h, double rho, double alpha);

// Thin-plate-spline map from G-plane to D-plane plus the Brown-Resnick
// parameters the map was fitted against.
struct Deformation {
    std::vector<Eigen::Vector2d> anchors;  // G-plane anchor coordinates
    Eigen::Matrix<double, 2, 3> affine;    // rows: output dims; cols: 1, x, y
    Eigen::MatrixXd spline_weights;        // n_anchors x 2
    double br_rho = 1.0;
    double br_alpha = 1.0;
    double objective = 0.0;           // attained penalised objective
    double identity_objective = 0.0;  // identity map with its best (rho, alpha)
};

// Roughly a quarter of the sites, uniformly spaced in row-major order.
std::vector<int> default_anchor_indices(int n_sites);

struct DeformOptions {
    double bending_weight = 1e-3;
    int multistarts = 5;
    double tol = 1e-8;
    int max_iter = 4000;
    std::uint64_t seed = 0;
};

// Minimises sum_{i<j} (br_chi(||q(s_i)-q(s_j)||) - chi_hat_ij)^2 plus a
// bending-energy penalty, jointly over the anchor images and (rho, alpha).
Deformation fit_deformation(const std::vector<Eigen::Vector2d>& coords, const ChiMatrix& chi_hat,
                            const std::vector<int>& anchor_indices,
                            const DeformOptions& opts = {});

// Evaluates affine part + sum_k w_k eta(||s - a_k||), eta(r) = r^2 log r.
std::vector<Eigen::Vector2d> apply_deformation(const Deformation& def,
                                               const std::vector<Eigen::Vector2d>& coords);

}  // namespace gex
