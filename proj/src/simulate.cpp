#include "gex/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "gex/special.hpp"

namespace gex {

double importance_weight(const Eigen::VectorXd& w, double k, const GaugeParams& params) {
    if (!(k >= 1.0)) throw validation_error("importance_weight: k must be >= 1");
    if (k == 1.0) return 1.0;
    const double g = params.gauge_value(w);
    const double r_tau = params.radial_threshold(w);
    const double a = params.shape();
    const double log_num = log_gamma_sf(a, k * r_tau * g);
    const double log_den = log_gamma_sf(a, r_tau * g);
    if (!std::isfinite(log_num) || !std::isfinite(log_den)) return 0.0;  // underflow
    return std::exp(log_num - log_den);
}

double estimate_p_rprime_gt_k(const ExceedanceSet& exc, double k, const GaugeParams& params) {
    if (exc.points.empty()) throw validation_error("estimate_p_rprime_gt_k: empty exceedance set");
    if (k == 1.0) return 1.0;
    double s = 0.0;
    for (const auto& p : exc.points) s += importance_weight(p.w, k, params);
    return s / static_cast<double>(exc.points.size());
}

namespace {

std::vector<double> cumulative_weights(const ExceedanceSet& exc, double k,
                                       const GaugeParams& params) {
    std::vector<double> cum(exc.points.size());
    double total = 0.0;
    for (std::size_t i = 0; i < exc.points.size(); ++i) {
        total += importance_weight(exc.points[i].w, k, params);
        cum[i] = total;
    }
    if (!(total > 0.0))
        throw sampling_error("sample_angles: all importance weights underflow; reduce k");
    return cum;
}

std::size_t draw_index(const std::vector<double>& cum, Rng& rng) {
    const double u = rng.uniform() * cum.back();
    return static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
}

}  // namespace

std::vector<std::size_t> sample_angle_indices(const ExceedanceSet& exc, double k, std::size_t m,
                                              Rng& rng, const GaugeParams& params) {
    if (m < 1) throw validation_error("sample_angles: m must be >= 1");
    const auto cum = cumulative_weights(exc, k, params);
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = draw_index(cum, rng);
    return out;
}

double sample_radius(const Eigen::VectorXd& w, double k, const GaugeParams& params, Rng& rng) {
    if (!(k >= 1.0)) throw validation_error("sample_radius: k must be >= 1");
    const double g = params.gauge_value(w);
    const double r_min = k * params.radial_threshold(w);
    const double a = params.shape();
    const double sf0 = gamma_sf(a, g * r_min);
    if (!(sf0 > 0.0))
        throw sampling_error("sample_radius: gamma survival underflow at the truncation point");
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double u = rng.uniform_open();
        const double r = gamma_sf_inv(a, u * sf0) / g;
        if (r > r_min) return r;
    }
    throw sampling_error("sample_radius: could not produce a draw above the truncation point");
}

SimulatedCloud simulate_cloud(const GaugeParams& params, const ExceedanceSet& exc, double k,
                              std::size_t m, Rng& rng) {
    SimulatedCloud cloud;
    cloud.k = k;
    cloud.seed = rng.seed();
    cloud.points.resize(static_cast<Eigen::Index>(m), params.dim());
    cloud.weights_used.resize(m);

    const auto cum = cumulative_weights(exc, k, params);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t idx = draw_index(cum, rng);
        const Eigen::VectorXd& w = exc.points[idx].w;
        const double r = sample_radius(w, k, params, rng);
        cloud.points.row(static_cast<Eigen::Index>(i)) = (r * w).transpose();
        cloud.weights_used[i] =
            cum[idx] - (idx > 0 ? cum[idx - 1] : 0.0);
    }
    return cloud;
}

Eigen::MatrixXd non_exceedance_rows(const Eigen::MatrixXd& exp_data, const GaugeParams& params) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index t = 0; t < exp_data.rows(); ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        if (r <= params.radial_threshold(z / r)) keep.push_back(t);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), exp_data.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(i) = exp_data.row(keep[i]);
    return out;
}

double select_k(const Eigen::MatrixXd& non_exc, const ExtremeSet& set, const KGrid& grid,
                bool* warning) {
    if (non_exc.rows() == 0) throw validation_error("select_k: empty non-exceedance set");
    validate_extreme_set(set, static_cast<int>(non_exc.cols()));
    if (warning) *warning = false;

    // single-day membership guard; conservative for ConsecutiveRun sets
    ExtremeSet day_set = set;
    if (day_set.kind == ExtremeSetKind::ConsecutiveRun) day_set.kind = ExtremeSetKind::AtLeastM;

    auto any_inside = [&](double k) {
        for (Eigen::Index t = 0; t < non_exc.rows(); ++t) {
            if (membership((k * non_exc.row(t).transpose()).eval(), day_set)) return true;
        }
        return false;
    };

    if (any_inside(grid.lo)) {
        if (warning) *warning = true;
        return 1.0;
    }
    double best = grid.lo;
    const long steps = static_cast<long>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9));
    for (long s = 1; s <= steps; ++s) {
        const double k = grid.lo + s * grid.step;
        if (any_inside(k)) break;
        best = k;
    }
    return best;
}

std::vector<AngularBlock> enumerate_blocks(const Eigen::MatrixXd& exp_data, double k,
                                           int block_len, const GaugeParams& params) {
    if (block_len < 1) throw validation_error("enumerate_blocks: block_len must be >= 1");
    const long n = exp_data.rows();

    // eligible anchors: R' > 1 and a full block within the series
    std::vector<AngularBlock> out;
    for (long t = 0; t + block_len - 1 < n; ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        const Eigen::VectorXd w = z / r;
        if (r > params.radial_threshold(w)) {
            AngularBlock blk;
            blk.anchor_t = t;
            blk.anchor_r = r;
            blk.weight = importance_weight(w, k, params);
            blk.days = exp_data.middleRows(t, block_len);
            out.push_back(std::move(blk));
        }
    }
    if (out.empty()) throw sampling_error("enumerate_blocks: no valid anchors");
    return out;
}

std::vector<AngularBlock> sample_blocks(const Eigen::MatrixXd& exp_data, double k, int block_len,
                                        std::size_t m, Rng& rng, const GaugeParams& params) {
    const auto blocks = enumerate_blocks(exp_data, k, block_len, params);
    std::vector<double> cum(blocks.size());
    double total = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        total += blocks[i].weight;
        cum[i] = total;
    }
    if (!(total > 0.0))
        throw sampling_error("sample_blocks: all importance weights underflow; reduce k");

    std::vector<AngularBlock> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = blocks[draw_index(cum, rng)];
    return out;
}

}  // namespace gex
