#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gex/errors.hpp"

namespace gex {

// Gridded multi-run daily series. Immutable after loading; safe to share
// across concurrent readers. Column order defines site index order.
struct GridDataset {
    int run_id = 0;
    std::vector<Eigen::Vector2d> sites;   // grid units
    std::vector<long> times;              // strictly increasing day index
    Eigen::MatrixXd values;               // n_times x n_sites, raw units

    int n_sites() const { return static_cast<int>(sites.size()); }
    long n_times() const { return static_cast<long>(times.size()); }
};

// Validates invariants; throws validation_error on the first violation.
void validate_dataset(const GridDataset& ds);

// CSV schema: first column `day`, remaining columns `s_<j>_<k>`.
GridDataset load_dataset(const std::string& path, int run_id);
void save_dataset(const GridDataset& ds, const std::string& path);

// Row-major coordinates {(j,k): j,k = 1..side}.
std::vector<Eigen::Vector2d> grid_coordinates(int side);

// Symmetric Euclidean distance matrix with zero diagonal.
Eigen::MatrixXd pairwise_distances(const std::vector<Eigen::Vector2d>& coords);

}  // namespace gex
