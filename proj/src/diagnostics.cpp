#include "gex/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gex/special.hpp"

namespace gex {

double pit_value(const AngularPoint& point, double threshold, const GaugeParams& params) {
    const double a = params.shape();
    const double g = params.gauge_value(point.w);
    const double log_ratio = log_gamma_sf(a, g * point.r) - log_gamma_sf(a, g * threshold);
    const double u = -std::expm1(std::min(log_ratio, 0.0));
    return std::clamp(u, std::numeric_limits<double>::min(),
                      1.0 - std::numeric_limits<double>::epsilon());
}

namespace {

std::vector<double> pit_values(const ExceedanceSet& exc, const GaugeParams& params) {
    std::vector<double> u(exc.points.size());
    for (std::size_t i = 0; i < exc.points.size(); ++i)
        u[i] = pit_value(exc.points[i], exc.thresholds[i], params);
    return u;
}

// Pointwise percentile bands over ascending order statistics of resampled
// PIT values.
void bootstrap_bands(const std::vector<double>& u, int n_reps, Rng& rng,
                     std::vector<double>& lo, std::vector<double>& hi) {
    const std::size_t n = u.size();
    std::vector<std::vector<double>> reps(n_reps, std::vector<double>(n));
    for (int rep = 0; rep < n_reps; ++rep) {
        Rng sub = rng.split(static_cast<std::uint64_t>(rep));
        auto& row = reps[rep];
        for (std::size_t i = 0; i < n; ++i) row[i] = u[sub.uniform_index(n)];
        std::sort(row.begin(), row.end());
    }
    lo.resize(n);
    hi.resize(n);
    std::vector<double> col(n_reps);
    const auto lo_idx = static_cast<std::size_t>(std::floor(0.025 * (n_reps - 1)));
    const auto hi_idx = static_cast<std::size_t>(std::ceil(0.975 * (n_reps - 1)));
    for (std::size_t i = 0; i < n; ++i) {
        for (int rep = 0; rep < n_reps; ++rep) col[rep] = reps[rep][i];
        std::sort(col.begin(), col.end());
        lo[i] = col[lo_idx];
        hi[i] = col[hi_idx];
    }
}

}  // namespace

DiagnosticSeries pp_points(const ExceedanceSet& exc, const GaugeParams& params, int n_reps,
                           Rng& rng) {
    if (exc.points.empty()) throw validation_error("pp_points: empty exceedance set");
    std::vector<double> u = pit_values(exc, params);
    std::sort(u.begin(), u.end());
    const std::size_t n = u.size();

    DiagnosticSeries out;
    out.kind = DiagnosticKind::PP;
    out.level = params.tau();
    out.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.x[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    out.y = u;
    bootstrap_bands(u, n_reps, rng, out.band_lo, out.band_hi);
    return out;
}

DiagnosticSeries qq_points(const ExceedanceSet& exc, const GaugeParams& params, int n_reps,
                           Rng& rng) {
    DiagnosticSeries out = pp_points(exc, params, n_reps, rng);
    out.kind = DiagnosticKind::QQ;
    const auto to_exp = [](double p) { return -std::log1p(-p); };
    for (auto& v : out.x) v = to_exp(v);
    for (auto& v : out.y) v = to_exp(v);
    for (auto& v : out.band_lo) v = to_exp(v);
    for (auto& v : out.band_hi) v = to_exp(v);
    return out;
}

DiagnosticSeries model_chi(const GaugeParams& params, const ExceedanceSet& exc, double u,
                           const Eigen::MatrixXd& distances, std::size_t m_sim, Rng& rng) {
    if (!(u > 0.0 && u < 1.0)) throw validation_error("model_chi: u must lie in (0,1)");
    const int d = params.dim();
    if (distances.rows() != d || distances.cols() != d)
        throw validation_error("model_chi: distance matrix dimension mismatch");

    const double p1 = static_cast<double>(exc.points.size()) / static_cast<double>(exc.n_total);
    const SimulatedCloud cloud = simulate_cloud(params, exc, 1.0, m_sim, rng);
    const double q = -std::log1p(-u);

    DiagnosticSeries out;
    out.kind = DiagnosticKind::CHI;
    out.level = u;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            std::size_t hits = 0;
            for (Eigen::Index t = 0; t < cloud.points.rows(); ++t)
                if (cloud.points(t, i) > q && cloud.points(t, j) > q) ++hits;
            const double prob =
                static_cast<double>(hits) / static_cast<double>(m_sim) * p1;
            const double chi = prob / (1.0 - u);
            out.x.push_back(distances(i, j));
            out.raw.push_back(chi);
            out.y.push_back(std::clamp(chi, 0.0, 1.0));
        }
    }
    return out;
}

DiagnosticSeries chi_series(const ChiMatrix& chi, const Eigen::MatrixXd& distances) {
    const int d = static_cast<int>(chi.chi.rows());
    if (distances.rows() != d || distances.cols() != d)
        throw validation_error("chi_series: distance matrix dimension mismatch");
    DiagnosticSeries out;
    out.kind = DiagnosticKind::CHI;
    out.level = chi.u;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            out.x.push_back(distances(i, j));
            out.y.push_back(chi.chi(i, j));
            out.raw.push_back(chi.chi(i, j));
        }
    }
    return out;
}

DiagnosticSeries bin_chi(const DiagnosticSeries& series, int n_bins) {
    if (series.kind != DiagnosticKind::CHI)
        throw validation_error("bin_chi: expects a CHI series");
    const std::size_t n = series.x.size();
    if (n == 0) throw validation_error("bin_chi: empty series");
    n_bins = std::min<int>(n_bins, static_cast<int>(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return series.x[a] < series.x[b]; });

    DiagnosticSeries out;
    out.kind = DiagnosticKind::CHI;
    out.level = series.level;
    out.run_id = series.run_id;
    for (int b = 0; b < n_bins; ++b) {
        const std::size_t begin = n * b / n_bins;
        const std::size_t end = n * (b + 1) / n_bins;
        if (begin == end) continue;
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            sx += series.x[order[i]];
            sy += series.y[order[i]];
        }
        out.x.push_back(sx / static_cast<double>(end - begin));
        out.y.push_back(sy / static_cast<double>(end - begin));
    }
    return out;
}

void save_series_csv(const DiagnosticSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot open output file: " + path);
    const bool bands = !series.band_lo.empty();
    out << (bands ? "x,y,lo,hi\n" : "x,y\n");
    char buf[128];
    for (std::size_t i = 0; i < series.x.size(); ++i) {
        if (bands)
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", series.x[i], series.y[i],
                          series.band_lo[i], series.band_hi[i]);
        else
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", series.x[i], series.y[i]);
        out << buf;
    }
    if (!out) throw validation_error("failed writing output file: " + path);
}

}  // namespace gex
