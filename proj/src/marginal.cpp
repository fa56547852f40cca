#include "gex/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include "gex/errors.hpp"
#include "gex/nelder_mead.hpp"

namespace gex {

namespace {

constexpr double kLogSigmaMin = -18.42;  // log(1e-8): lower bound for the scale
constexpr double kTwoPi = 6.283185307179586;

double clamped_eta(double eta) { return std::max(eta, kLogSigmaMin); }

double gaussian_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& bmu, const Eigen::VectorXd& bsig) {
    const Eigen::VectorXd mu = X * bmu;
    const Eigen::VectorXd eta = X * bsig;
    double ll = 0.0;
    for (Eigen::Index t = 0; t < y.size(); ++t) {
        const double e = clamped_eta(eta[t]);
        const double z = (y[t] - mu[t]) * std::exp(-e);
        ll += -0.5 * std::log(kTwoPi) - e - 0.5 * z * z;
    }
    return ll;
}

// GPD cdf of an excess e >= 0 with scale psi, shape xi; strictly below 1.
double gpd_cdf(double e, double psi, double xi) {
    if (e <= 0.0) return 0.0;
    double cdf;
    if (std::fabs(xi) < 1e-8) {
        cdf = -std::expm1(-e / psi);
    } else {
        const double arg = 1.0 + xi * e / psi;
        if (arg <= 0.0) return 1.0 - 1e-16;  // beyond the upper endpoint (xi < 0)
        cdf = 1.0 - std::pow(arg, -1.0 / xi);
    }
    return std::min(cdf, 1.0 - 1e-16);
}

}  // namespace

CovariateMatrix build_covariates(const GridDataset& ds, int site, const CovariateConfig& cfg) {
    if (site < 0 || site >= ds.n_sites()) throw validation_error("build_covariates: bad site");
    const long n = ds.n_times();
    if (n < cfg.lags + 1)
        throw validation_error("build_covariates: series too short for the lag structure");
    const long n_use = n - cfg.lags;
    const int p = 2 + 2 * cfg.harmonics + cfg.lags;

    CovariateMatrix cov;
    cov.first_row = cfg.lags;
    cov.X.resize(n_use, p);
    cov.days.resize(n_use);
    for (long i = 0; i < n_use; ++i) {
        const long t = i + cfg.lags;
        const long day = ds.times[t];
        cov.days[i] = day;
        int c = 0;
        cov.X(i, c++) = 1.0;
        cov.X(i, c++) = static_cast<double>(day) / static_cast<double>(ds.times[n - 1]);
        for (int h = 1; h <= cfg.harmonics; ++h) {
            const double angle = kTwoPi * h * static_cast<double>(day) / 365.25;
            cov.X(i, c++) = std::cos(angle);
            cov.X(i, c++) = std::sin(angle);
        }
        for (int l = 1; l <= cfg.lags; ++l) cov.X(i, c++) = ds.values(t - l, site);
    }
    return cov;
}

LocationScaleFit fit_location_scale(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (y.size() != n) throw validation_error("fit_location_scale: size mismatch");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw validation_error("fit_location_scale: covariate matrix rank deficient");

    LocationScaleFit fit;
    fit.mu_coeffs = qr.solve(y);
    const Eigen::VectorXd resid0 = y - X * fit.mu_coeffs;
    const double s0 = std::sqrt(std::max(resid0.squaredNorm() / n, 1e-16));
    fit.log_sigma_coeffs = Eigen::VectorXd::Zero(p);
    fit.log_sigma_coeffs[0] = std::log(s0);

    double ll = gaussian_loglik(y, X, fit.mu_coeffs, fit.log_sigma_coeffs);
    const int max_outer = 500;
    for (fit.iterations = 0; fit.iterations < max_outer; ++fit.iterations) {
        // weighted least squares for the location given the scale
        Eigen::VectorXd eta = X * fit.log_sigma_coeffs;
        Eigen::VectorXd w(n);
        for (Eigen::Index t = 0; t < n; ++t) w[t] = std::exp(-2.0 * clamped_eta(eta[t]));
        const Eigen::MatrixXd Xw = w.asDiagonal() * X;
        fit.mu_coeffs = (X.transpose() * Xw).ldlt().solve(Xw.transpose() * y);

        // one damped Newton step on the log-scale coefficients
        const Eigen::VectorXd resid = y - X * fit.mu_coeffs;
        eta = X * fit.log_sigma_coeffs;
        Eigen::VectorXd z2(n);
        for (Eigen::Index t = 0; t < n; ++t) {
            const double zt = resid[t] * std::exp(-clamped_eta(eta[t]));
            z2[t] = zt * zt;
        }
        const Eigen::VectorXd grad = X.transpose() * (z2.array() - 1.0).matrix();
        Eigen::MatrixXd hess = 2.0 * X.transpose() * (z2.asDiagonal() * X);
        hess.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);

        double scale = 1.0;
        double ll_new = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd bsig_new;
        for (int h = 0; h < 40; ++h) {
            bsig_new = fit.log_sigma_coeffs + scale * step;
            ll_new = gaussian_loglik(y, X, fit.mu_coeffs, bsig_new);
            if (ll_new >= ll - 1e-12) break;
            scale *= 0.5;
        }
        if (ll_new > ll) fit.log_sigma_coeffs = bsig_new;
        const double delta = ll_new - ll;
        ll = std::max(ll, ll_new);
        if (std::fabs(delta) < 1e-9 * (std::fabs(ll) + 1.0)) {
            fit.converged = true;
            break;
        }
    }
    fit.fit_loglik = ll;
    const Eigen::VectorXd eta = X * fit.log_sigma_coeffs;
    fit.degenerate = (eta.minCoeff() <= kLogSigmaMin + 1e-9);
    if (!fit.converged && !fit.degenerate)
        throw fit_error("fit_location_scale: no convergence after " + std::to_string(max_outer) +
                        " iterations (loglik " + std::to_string(ll) + ")");
    return fit;
}

Eigen::VectorXd standardize(const Eigen::VectorXd& y, const LocationScaleFit& fit,
                            const Eigen::MatrixXd& X) {
    const Eigen::VectorXd mu = X * fit.mu_coeffs;
    const Eigen::VectorXd eta = X * fit.log_sigma_coeffs;
    Eigen::VectorXd z(y.size());
    for (Eigen::Index t = 0; t < y.size(); ++t)
        z[t] = (y[t] - mu[t]) * std::exp(-clamped_eta(eta[t]));
    return z;
}

GpdFit fit_gpd(const Eigen::VectorXd& z, const Eigen::MatrixXd& X, double quantile_level) {
    const Eigen::Index n = z.size(), p = X.cols();
    if (X.rows() != n) throw validation_error("fit_gpd: size mismatch");
    if (!(quantile_level > 0.0 && quantile_level < 1.0))
        throw validation_error("fit_gpd: quantile level must lie in (0,1)");

    std::vector<double> sorted(z.data(), z.data() + n);
    std::size_t idx = static_cast<std::size_t>(std::ceil(quantile_level * static_cast<double>(n)));
    idx = std::min(std::max<std::size_t>(idx, 1), sorted.size());
    std::nth_element(sorted.begin(), sorted.begin() + (idx - 1), sorted.end());
    const double u = sorted[idx - 1];

    std::vector<Eigen::Index> exceed;
    for (Eigen::Index t = 0; t < n; ++t)
        if (z[t] > u) exceed.push_back(t);
    if (exceed.size() < 30)
        throw validation_error("fit_gpd: only " + std::to_string(exceed.size()) +
                               " exceedances; need at least 30");

    const Eigen::Index m = static_cast<Eigen::Index>(exceed.size());
    Eigen::VectorXd e(m);
    Eigen::MatrixXd Xe(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        e[i] = z[exceed[i]] - u;
        Xe.row(i) = X.row(exceed[i]);
    }

    auto neg_ll = [&](const Eigen::VectorXd& par) -> double {
        const Eigen::VectorXd beta = par.head(p);
        const double xi = par[p];
        if (xi <= -0.5 || xi > 5.0) return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd eta = Xe * beta;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double psi = std::exp(eta[i]);
            if (!std::isfinite(psi) || psi <= 0.0) return std::numeric_limits<double>::infinity();
            if (std::fabs(xi) < 1e-8) {
                ll += -eta[i] - e[i] / psi;
            } else {
                const double arg = 1.0 + xi * e[i] / psi;
                if (arg <= 0.0) return std::numeric_limits<double>::infinity();
                ll += -eta[i] - (1.0 / xi + 1.0) * std::log(arg);
            }
        }
        return -ll;
    };

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p + 1);
    x0[0] = std::log(std::max(e.mean(), 1e-12));
    x0[p] = 0.1;
    NelderMeadOptions nm;
    nm.tol = 1e-10;
    nm.max_iter = 20000;
    const auto res = nelder_mead(neg_ll, x0, nm);
    if (!std::isfinite(res.fval)) throw fit_error("fit_gpd: optimisation failed");

    GpdFit fit;
    fit.threshold = u;
    fit.quantile_level = quantile_level;
    fit.psi_coeffs = res.x.head(p);
    fit.xi = res.x[p];
    fit.loglik = -res.fval;
    fit.n_exceed = m;
    fit.converged = res.converged;
    if (fit.xi < -0.49)
        throw fit_error("fit_gpd: shape at the -0.5 boundary; likelihood unbounded");
    return fit;
}

double SiteMarginal::psi_at(long row) const {
    return std::exp(cov.X.row(row).dot(gpd.psi_coeffs));
}

MarginalModel fit_marginal_model(const GridDataset& ds, const CovariateConfig& cfg,
                                 double quantile_level, bool preprocess, int threads) {
    validate_dataset(ds);
    const int d = ds.n_sites();

    auto fit_site = [&](int j) {
        SiteMarginal site;
        site.cov = build_covariates(ds, j, cfg);
        const long n_use = site.cov.X.rows();
        site.y.resize(n_use);
        for (long i = 0; i < n_use; ++i) site.y[i] = ds.values(i + site.cov.first_row, j);

        if (preprocess) {
            site.ls = fit_location_scale(site.y, site.cov.X);
            site.z = standardize(site.y, site.ls, site.cov.X);
        } else {
            site.ls.mu_coeffs = Eigen::VectorXd::Zero(site.cov.X.cols());
            site.ls.log_sigma_coeffs = Eigen::VectorXd::Zero(site.cov.X.cols());
            site.ls.converged = true;
            site.z = site.y;
        }
        site.gpd = fit_gpd(site.z, site.cov.X, quantile_level);
        site.sorted_z.assign(site.z.data(), site.z.data() + n_use);
        std::sort(site.sorted_z.begin(), site.sorted_z.end());
        site.n = n_use;
        const long n_leq =
            std::upper_bound(site.sorted_z.begin(), site.sorted_z.end(), site.gpd.threshold) -
            site.sorted_z.begin();
        site.phi_u = static_cast<double>(n_leq) / static_cast<double>(n_use + 1);
        return site;
    };

    MarginalModel model;
    model.sites.resize(d);
    const int n_workers = threads > 0 ? threads : static_cast<int>(
        std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::future<SiteMarginal>> futures;
    int next = 0;
    while (next < d || !futures.empty()) {
        while (next < d && static_cast<int>(futures.size()) < n_workers) {
            futures.push_back(std::async(std::launch::async, fit_site, next));
            ++next;
        }
        const int j = next - static_cast<int>(futures.size());
        model.sites[j] = futures.front().get();
        futures.erase(futures.begin());
    }
    model.n_usable = model.sites.empty() ? 0 : model.sites[0].n;
    return model;
}

double semiparametric_cdf(double z, long row, int site, const MarginalModel& model) {
    const SiteMarginal& s = model.sites.at(site);
    if (z < s.gpd.threshold) {
        const auto lo = std::lower_bound(s.sorted_z.begin(), s.sorted_z.end(), z);
        const auto hi = std::upper_bound(lo, s.sorted_z.end(), z);
        const double n_less = static_cast<double>(lo - s.sorted_z.begin());
        const double n_eq = static_cast<double>(hi - lo);
        double rank = (n_eq > 0.0) ? n_less + (n_eq + 1.0) / 2.0 : n_less;
        rank = std::max(rank, 0.5);  // values below the sample minimum
        return rank / static_cast<double>(s.n + 1);
    }
    const double e = z - s.gpd.threshold;
    const double psi = s.psi_at(row);
    return s.phi_u + (1.0 - s.phi_u) * gpd_cdf(e, psi, s.gpd.xi);
}

double to_exponential(double u) {
    if (!(u > 0.0 && u < 1.0)) throw validation_error("to_exponential: u must lie in (0,1)");
    return -std::log1p(-u);
}

double leadbetter_to_exponential(double threshold_raw, int site, const MarginalModel& model,
                                 bool* extrapolated) {
    const SiteMarginal& s = model.sites.at(site);
    if (extrapolated) *extrapolated = false;

    long t_star = 0;
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i < s.n; ++i) {
        const double diff = std::fabs(s.y[i] - threshold_raw);
        if (diff < best) {
            best = diff;
            t_star = i;
        }
    }

    double u_star;
    if (threshold_raw > s.y.maxCoeff()) {
        // beyond the data range: standardise the raw value itself and use the tail branch
        if (extrapolated) *extrapolated = true;
        const double mu = s.cov.X.row(t_star).dot(s.ls.mu_coeffs);
        const double sig = std::exp(std::max(s.cov.X.row(t_star).dot(s.ls.log_sigma_coeffs),
                                             kLogSigmaMin));
        const double z_thr = (threshold_raw - mu) / sig;
        const double e = std::max(z_thr - s.gpd.threshold, 0.0);
        u_star = s.phi_u + (1.0 - s.phi_u) * gpd_cdf(e, s.psi_at(t_star), s.gpd.xi);
    } else {
        const double z0 = s.z[t_star];
        if (z0 < s.gpd.threshold) {
            u_star = semiparametric_cdf(z0, t_star, site, model);
        } else {
            // nearest tail sample value (z0 is itself a sample point)
            const auto it = std::lower_bound(s.sorted_z.begin(), s.sorted_z.end(), z0);
            const double z1 = (it != s.sorted_z.end()) ? *it : s.sorted_z.back();
            u_star = semiparametric_cdf(z1, t_star, site, model);
        }
    }
    return to_exponential(std::min(u_star, 1.0 - 1e-16));
}

Eigen::MatrixXd to_exponential_matrix(const MarginalModel& model) {
    const int d = static_cast<int>(model.sites.size());
    const long n = model.n_usable;
    Eigen::MatrixXd out(n, d);
    for (int j = 0; j < d; ++j)
        for (long i = 0; i < n; ++i)
            out(i, j) = to_exponential(
                std::min(semiparametric_cdf(model.sites[j].z[i], i, j, model), 1.0 - 1e-16));
    return out;
}

}  // namespace gex
