#include "gex/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace gex {

void validate_extreme_set(const ExtremeSet& set, int d) {
    if (set.q.size() != d) throw validation_error("extreme set dimension mismatch");
    for (int j = 0; j < d; ++j)
        if (!(set.q[j] > 0.0)) throw validation_error("extreme set thresholds must be positive");
    if (set.kind != ExtremeSetKind::AllExceed && (set.m < 1 || set.m > d))
        throw validation_error("extreme set m out of range");
    if (set.run_len < 1) throw validation_error("extreme set run_len must be >= 1");
}

bool membership(const Eigen::VectorXd& z, const ExtremeSet& set) {
    validate_extreme_set(set, static_cast<int>(z.size()));
    switch (set.kind) {
        case ExtremeSetKind::AllExceed: {
            for (Eigen::Index j = 0; j < z.size(); ++j)
                if (!(z[j] > set.q[j])) return false;
            return true;
        }
        case ExtremeSetKind::AtLeastM: {
            int cnt = 0;
            for (Eigen::Index j = 0; j < z.size(); ++j)
                if (z[j] > set.q[j]) ++cnt;
            return cnt >= set.m;
        }
        case ExtremeSetKind::ConsecutiveRun:
            throw validation_error("ConsecutiveRun membership requires a block of day vectors");
    }
    return false;
}

bool membership(const Eigen::MatrixXd& block, const ExtremeSet& set) {
    const int d = static_cast<int>(block.cols());
    validate_extreme_set(set, d);
    if (set.kind != ExtremeSetKind::ConsecutiveRun) {
        for (Eigen::Index t = 0; t < block.rows(); ++t)
            if (membership(block.row(t).transpose().eval(), set)) return true;
        return false;
    }
    if (block.rows() < set.run_len)
        throw validation_error("block shorter than the required run length");
    for (Eigen::Index t = 0; t + set.run_len <= block.rows(); ++t) {
        int cnt = 0;
        for (int j = 0; j < d; ++j) {
            double min_v = block(t, j);
            for (int l = 1; l < set.run_len; ++l) min_v = std::min(min_v, block(t + l, j));
            if (min_v > set.q[j]) ++cnt;
        }
        if (cnt >= set.m) return true;
    }
    return false;
}

TailProbability tail_probability(const GaugeParams& params, const ExceedanceSet& exc,
                                 const ExtremeSet& set, double k, std::size_t m_sim, Rng& rng) {
    validate_extreme_set(set, params.dim());
    if (m_sim < 1) throw validation_error("tail_probability: m_sim must be >= 1");

    TailProbability out;
    out.p_rprime_gt_1 =
        static_cast<double>(exc.points.size()) / static_cast<double>(exc.n_total);
    out.p_k_given_1 = estimate_p_rprime_gt_k(exc, k, params);

    const SimulatedCloud cloud = simulate_cloud(params, exc, k, m_sim, rng);
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < cloud.points.rows(); ++i)
        if (membership(cloud.points.row(i).transpose().eval(), set)) ++hits;
    out.hits = hits;
    out.frac_in_set = static_cast<double>(hits) / static_cast<double>(m_sim);
    out.zero_hits_warning = (hits == 0);
    out.prob = out.frac_in_set * out.p_k_given_1 * out.p_rprime_gt_1;
    return out;
}

TailProbability tail_probability_from_blocks(const GaugeParams& params,
                                             const std::vector<AngularBlock>& blocks,
                                             double p_rprime_gt_1, const ExtremeSet& set, double k,
                                             std::size_t m_sim, Rng& rng) {
    if (blocks.empty()) throw sampling_error("tail_probability_from_blocks: no blocks");
    validate_extreme_set(set, static_cast<int>(blocks.front().days.cols()));

    TailProbability out;
    out.p_rprime_gt_1 = p_rprime_gt_1;
    double iw_sum = 0.0, total = 0.0;
    std::vector<double> cum(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        iw_sum += blocks[i].weight;
        total += blocks[i].weight;
        cum[i] = total;
    }
    if (!(total > 0.0))
        throw sampling_error("tail_probability_from_blocks: all importance weights underflow");
    out.p_k_given_1 = (k == 1.0) ? 1.0 : iw_sum / static_cast<double>(blocks.size());

    std::size_t hits = 0;
    for (std::size_t i = 0; i < m_sim; ++i) {
        const double u = rng.uniform() * total;
        const std::size_t idx = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        const AngularBlock& blk = blocks[idx];
        const Eigen::VectorXd z = blk.days.row(0);
        const Eigen::VectorXd w = z / blk.anchor_r;
        const double r_star = sample_radius(w, k, params, rng);
        const Eigen::MatrixXd scaled = blk.days * (r_star / blk.anchor_r);
        if (membership(scaled, set)) ++hits;
    }
    out.hits = hits;
    out.frac_in_set = static_cast<double>(hits) / static_cast<double>(m_sim);
    out.zero_hits_warning = (hits == 0);
    out.prob = out.frac_in_set * out.p_k_given_1 * out.p_rprime_gt_1;
    return out;
}

TailProbability tail_probability_blocks(const GaugeParams& params, const Eigen::MatrixXd& exp_data,
                                        const ExtremeSet& set, double k, int block_len,
                                        std::size_t m_sim, Rng& rng) {
    std::size_t n_exceed = 0, n_rows = 0;
    for (Eigen::Index t = 0; t < exp_data.rows(); ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        ++n_rows;
        if (r > params.radial_threshold(z / r)) ++n_exceed;
    }
    if (n_rows == 0) throw validation_error("tail_probability_blocks: empty series");
    const double p1 = static_cast<double>(n_exceed) / static_cast<double>(n_rows);
    const auto blocks = enumerate_blocks(exp_data, k, block_len, params);
    return tail_probability_from_blocks(params, blocks, p1, set, k, m_sim, rng);
}

double inclusion_exclusion_oracle(const Eigen::MatrixXd& sample, const Eigen::VectorXd& q, int m) {
    const int d = static_cast<int>(sample.cols());
    const long n = sample.rows();
    if (d > 12)
        throw validation_error(
            "inclusion_exclusion_oracle: refused for d > 12; the alternating sum over subsets is "
            "computationally infeasible");
    if (q.size() != d) throw validation_error("inclusion_exclusion_oracle: threshold size mismatch");
    if (m < 1 || m > d) throw validation_error("inclusion_exclusion_oracle: m out of range");
    if (n < 1) throw validation_error("inclusion_exclusion_oracle: empty sample");

    const std::size_t n_masks = std::size_t{1} << d;
    std::vector<long long> superset_count(n_masks, 0);
    for (long t = 0; t < n; ++t) {
        std::size_t mask = 0;
        for (int j = 0; j < d; ++j)
            if (sample(t, j) > q[j]) mask |= (std::size_t{1} << j);
        superset_count[mask] += 1;
    }
    // zeta transform: superset_count[J] = #points whose exceedance mask contains J
    for (int b = 0; b < d; ++b)
        for (std::size_t mask = 0; mask < n_masks; ++mask)
            if (!(mask & (std::size_t{1} << b)))
                superset_count[mask] += superset_count[mask | (std::size_t{1} << b)];

    // binomial table C(r-1, m-1), r <= 12
    long long binom[13][13] = {};
    for (int i = 0; i <= 12; ++i) {
        binom[i][0] = 1;
        for (int j = 1; j <= i; ++j)
            binom[i][j] = binom[i - 1][j - 1] + (j <= i - 1 ? binom[i - 1][j] : 0);
    }

    long long numerator = 0;  // exact integer arithmetic; magnitudes stay small
    for (std::size_t mask = 1; mask < n_masks; ++mask) {
        const int r = std::popcount(mask);
        if (r < m) continue;
        const long long w = binom[r - 1][m - 1] * superset_count[mask];
        numerator += ((r - m) % 2 == 0) ? w : -w;
    }
    return static_cast<double>(numerator) / static_cast<double>(n);
}

double ctq_frequency(double prob, long n_obs) {
    if (!(prob >= 0.0 && prob <= 1.0)) throw validation_error("ctq_frequency: prob outside [0,1]");
    if (n_obs < 1) throw validation_error("ctq_frequency: n_obs must be >= 1");
    return prob * static_cast<double>(n_obs);
}

BootstrapSummary bootstrap_ci(
    const std::function<double(const std::vector<std::size_t>&, Rng&)>& replicate,
    std::size_t data_size, int n_reps, double level, Rng& rng) {
    if (n_reps < 100) throw validation_error("bootstrap_ci: need at least 100 replicates");
    if (!(level > 0.0 && level < 1.0)) throw validation_error("bootstrap_ci: bad level");
    if (data_size == 0) throw validation_error("bootstrap_ci: empty data");

    std::vector<double> reps(n_reps, std::numeric_limits<double>::quiet_NaN());
    std::atomic<int> failures{0};
    const unsigned n_workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> tasks;
    std::atomic<int> next{0};
    for (unsigned wkr = 0; wkr < n_workers; ++wkr) {
        tasks.push_back(std::async(std::launch::async, [&]() {
            for (int rep = next.fetch_add(1); rep < n_reps; rep = next.fetch_add(1)) {
                Rng sub = rng.split(static_cast<std::uint64_t>(rep));
                std::vector<std::size_t> idx(data_size);
                for (auto& v : idx) v = sub.uniform_index(data_size);
                try {
                    reps[rep] = replicate(idx, sub);
                } catch (const std::exception&) {
                    failures.fetch_add(1);
                }
            }
        }));
    }
    for (auto& t : tasks) t.get();

    if (failures.load() > n_reps / 20)
        throw fit_error("bootstrap_ci: more than 5% of replicates failed (" +
                        std::to_string(failures.load()) + "/" + std::to_string(n_reps) + ")");
    std::vector<double> ok;
    for (double v : reps)
        if (!std::isnan(v)) ok.push_back(v);
    std::sort(ok.begin(), ok.end());

    BootstrapSummary out;
    out.replicates = ok;
    out.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(ok.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return (i + 1 < ok.size()) ? ok[i] * (1.0 - frac) + ok[i + 1] * frac : ok.back();
    };
    out.median = quantile(0.5);
    out.lo = quantile((1.0 - level) / 2.0);
    out.hi = quantile(1.0 - (1.0 - level) / 2.0);
    return out;
}

}  // namespace gex
