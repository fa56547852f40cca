#include "gex/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "gex/ingest.hpp"
#include "gex/nelder_mead.hpp"
#include "gex/rng.hpp"
#include "gex/special.hpp"

namespace gex {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr double kKappaLo = 0.05, kKappaHi = 2.0;
constexpr double kGammaLo = 0.05, kGammaHi = 10.0;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

// Fixed-order reduction independent of input permutation.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double v : terms) s += v;
    return s;
}

double quantile_in_place(std::vector<double>& v, double tau) {
    std::size_t idx = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(v.size())));
    if (idx == 0) idx = 1;
    if (idx > v.size()) idx = v.size();
    std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
    return v[idx - 1];
}

}  // namespace

ExceedanceSet make_exceedance_set(const Eigen::MatrixXd& exp_data, const GaugeParams& params) {
    if (exp_data.cols() != params.dim())
        throw validation_error("make_exceedance_set: dimension mismatch");
    ExceedanceSet set;
    set.d = static_cast<int>(exp_data.cols());
    set.n_total = static_cast<std::size_t>(exp_data.rows());
    for (Eigen::Index t = 0; t < exp_data.rows(); ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        AngularPoint p = radial_angular(z, t);
        const double thr = params.radial_threshold(p.w);
        if (p.r > thr) {
            set.points.push_back(std::move(p));
            set.thresholds.push_back(thr);
        }
    }
    return set;
}

PairwiseFit fit_pairwise(const Eigen::MatrixXd& exp_data,
                         const std::vector<Eigen::Vector2d>& dplane_coords, double tau,
                         const FitOptions& opts) {
    const int d = static_cast<int>(exp_data.cols());
    if (d < 2) throw validation_error("fit_pairwise: need d >= 2");
    if (static_cast<int>(dplane_coords.size()) != d)
        throw validation_error("fit_pairwise: coordinate count mismatch");
    if (!(tau > 0.0 && tau < 1.0)) throw validation_error("fit_pairwise: tau must lie in (0,1)");

    const Eigen::MatrixXd dist = pairwise_distances(dplane_coords);
    const long n = exp_data.rows();

    // Per pair, summarise the conditional radial tail as an empirical angular
    // quantile surface: equal-count bins in w, with the per-bin tau-quantile
    // of r as the bivariate threshold estimate. Under the model the surface is
    // r_tau(w) = c_pair / g(w; phi, kappa), so (phi, kappa) are fitted by
    // least squares on log r_tau(w) with the pair constant profiled out. This
    // keeps the fitted data fixed across candidates; selecting exceedances
    // anew per candidate makes candidates incomparable (the resulting
    // pseudo-objective has a degenerate maximum at the kappa boundary), and a
    // fixed-selection truncated likelihood is dominated by sub-asymptotic
    // radial shape rather than the threshold geometry the later stages use.
    struct PairSurface {
        double h = 0.0;  // inter-site distance
        std::vector<double> w_mid, log_thr;
    };
    std::vector<PairSurface> pairs;
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            PairSurface ps;
            ps.h = dist(i, j);
            std::vector<std::pair<double, double>> wr;  // (w1, r), sorted by w1
            wr.reserve(n);
            for (long t = 0; t < n; ++t) {
                const double zi = exp_data(t, i), zj = exp_data(t, j);
                const double r = zi + zj;
                if (r <= 0.0) continue;
                wr.emplace_back(zi / r, r);
            }
            const long m = static_cast<long>(wr.size());
            if (m < 10) throw validation_error("fit_pairwise: too few usable rows for a pair");
            std::sort(wr.begin(), wr.end());
            const long bins = std::clamp(m / 50, 2L, 20L);
            for (long b = 0; b < bins; ++b) {
                const long lo = b * m / bins, hi = (b + 1) * m / bins;
                std::vector<double> rs;
                rs.reserve(hi - lo);
                for (long t = lo; t < hi; ++t) rs.push_back(wr[t].second);
                const double bin_thr = quantile_in_place(rs, tau);
                double w_mid = 0.0;
                for (long t = lo; t < hi; ++t) w_mid += wr[t].first;
                ps.w_mid.push_back(w_mid / static_cast<double>(hi - lo));
                ps.log_thr.push_back(std::log(bin_thr));
            }
            pairs.push_back(std::move(ps));
        }
    }

    // Bivariate standard Gaussian gauge (gamma = 2):
    // g(w) = (w1 + w2 - 2c sqrt(w1 w2)) / (1 - c^2).
    auto neg_objective = [&](const Eigen::VectorXd& x) -> double {
        const double phi = std::exp(x[0]);
        const double kappa = kKappaLo + (kKappaHi - kKappaLo) * sigmoid(x[1]);
        if (!std::isfinite(phi) || phi <= 0.0) return std::numeric_limits<double>::infinity();
        double total = 0.0;
        std::vector<double> log_g;
        for (const auto& ps : pairs) {
            const double c = std::exp(-std::pow(ps.h / phi, kappa));
            const double omc2 = 1.0 - c * c;
            if (!(omc2 > 1e-14)) return std::numeric_limits<double>::infinity();
            log_g.resize(ps.w_mid.size());
            double intercept = 0.0;  // profiled log c_pair
            for (std::size_t b = 0; b < ps.w_mid.size(); ++b) {
                const double w1 = ps.w_mid[b], w2 = 1.0 - w1;
                log_g[b] = std::log((w1 + w2 - 2.0 * c * std::sqrt(w1 * w2)) / omc2);
                intercept += ps.log_thr[b] + log_g[b];
            }
            intercept /= static_cast<double>(ps.w_mid.size());
            for (std::size_t b = 0; b < ps.w_mid.size(); ++b) {
                const double e = ps.log_thr[b] + log_g[b] - intercept;
                total += e * e;
            }
        }
        return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
    };

    // init: range at the median inter-site distance, kappa = 1
    std::vector<double> dvals;
    for (const auto& pe : pairs) dvals.push_back(pe.h);
    std::nth_element(dvals.begin(), dvals.begin() + dvals.size() / 2, dvals.end());
    Eigen::VectorXd x0(2);
    x0 << std::log(dvals[dvals.size() / 2]), logit((1.0 - kKappaLo) / (kKappaHi - kKappaLo));

    NelderMeadOptions nm;
    nm.tol = opts.tol;
    nm.max_iter = opts.max_iter;
    nm.trace = opts.trace;
    // restart with a fresh simplex at the optimum until no further improvement
    NelderMeadResult res = nelder_mead(neg_objective, x0, nm);
    for (int restart = 0; restart < 4 && std::isfinite(res.fval); ++restart) {
        NelderMeadOptions nm2 = nm;
        nm2.trace = nullptr;
        const auto again = nelder_mead(neg_objective, res.x, nm2);
        if (again.fval < res.fval - 1e-12)
            res = again;
        else
            break;
    }
    if (!std::isfinite(res.fval))
        throw fit_error("fit_pairwise: quantile-surface optimisation failed");

    PairwiseFit fit;
    fit.phi = std::exp(res.x[0]);
    fit.kappa = kKappaLo + (kKappaHi - kKappaLo) * sigmoid(res.x[1]);
    fit.loglik = -res.fval;  // attained objective (negative residual sum of squares)
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    fit.kappa_at_boundary = fit.kappa > 1.995;

    // d-dimensional calibration with the fitted standard Gaussian gauge
    const CorrelationModel corr(dist, fit.phi, fit.kappa);
    std::vector<double> radii, gauges;
    radii.reserve(n);
    gauges.reserve(n);
    for (long t = 0; t < n; ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        radii.push_back(r);
        gauges.push_back(gauge(z / r, corr, 2.0));
    }
    fit.c_tau = calibrate_c_tau(radii, gauges, tau);
    return fit;
}

double tg_loglik(double lambda, double gamma, const CorrelationModel& corr,
                 const ExceedanceSet& exc) {
    if (!(lambda > 0.0 && gamma > 0.0)) return kNegInf;
    const double a = lambda * exc.d;
    const double lg_a = std::lgamma(a);
    std::vector<double> terms;
    terms.reserve(exc.points.size());
    for (std::size_t i = 0; i < exc.points.size(); ++i) {
        const AngularPoint& p = exc.points[i];
        if (!(p.r > exc.thresholds[i])) return kNegInf;  // likelihood domain violated
        double g;
        try {
            g = gauge(p.w, corr, gamma);
        } catch (const numerical_error&) {
            return kNegInf;
        }
        const double term = a * std::log(g) - lg_a + (a - 1.0) * std::log(p.r) - p.r * g -
                            log_gamma_sf(a, exc.thresholds[i] * g);
        if (!std::isfinite(term)) return kNegInf;
        terms.push_back(term);
    }
    return sorted_sum(terms);
}

// Candidate-parameter form: the truncation threshold follows the candidate
// (phi, kappa) through r_tau(w) = C_tau / g2(w) rather than the thresholds
// stored at selection time. Points falling at or below the candidate
// threshold violate the likelihood domain.
double tg_loglik(const GaugeParams& params, const ExceedanceSet& exc) {
    const double lambda = params.lambda(), gamma = params.gamma();
    if (!(lambda > 0.0 && gamma > 0.0)) return kNegInf;
    const double a = lambda * exc.d;
    const double lg_a = std::lgamma(a);
    std::vector<double> terms;
    terms.reserve(exc.points.size());
    for (std::size_t i = 0; i < exc.points.size(); ++i) {
        const AngularPoint& p = exc.points[i];
        double g, thr;
        try {
            g = params.gauge_value(p.w);
            thr = params.radial_threshold(p.w);
        } catch (const numerical_error&) {
            return kNegInf;
        }
        if (!(p.r > thr)) return kNegInf;  // likelihood domain violated
        const double term = a * std::log(g) - lg_a + (a - 1.0) * std::log(p.r) - p.r * g -
                            log_gamma_sf(a, thr * g);
        if (!std::isfinite(term)) return kNegInf;
        terms.push_back(term);
    }
    return sorted_sum(terms);
}

FittedGeometricModel fit_truncated_gamma(const ExceedanceSet& exc,
                                         const std::vector<Eigen::Vector2d>& dplane_coords,
                                         const PairwiseFit& init, double tau,
                                         const FitOptions& opts) {
    if (exc.points.size() < 40)
        throw validation_error("fit_truncated_gamma: need at least 10 exceedances per parameter");
    const Eigen::MatrixXd dist = pairwise_distances(dplane_coords);

    // x = (log lambda, log phi, logit of kappa, log gamma)
    auto decode = [&](const Eigen::VectorXd& x, double& lambda, double& phi, double& kappa,
                      double& gamma) {
        lambda = std::exp(x[0]);
        phi = std::exp(x[1]);
        kappa = kKappaLo + (kKappaHi - kKappaLo) * sigmoid(x[2]);
        gamma = std::exp(x[3]);
    };
    auto neg_ll = [&](const Eigen::VectorXd& x) -> double {
        double lambda, phi, kappa, gamma;
        decode(x, lambda, phi, kappa, gamma);
        if (!std::isfinite(lambda) || !std::isfinite(phi) || !std::isfinite(gamma))
            return std::numeric_limits<double>::infinity();
        if (gamma < kGammaLo || gamma > kGammaHi) return std::numeric_limits<double>::infinity();
        try {
            const GaugeParams cand(lambda, phi, kappa, gamma, init.c_tau, tau, dplane_coords);
            return -tg_loglik(cand, exc);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd x0(4);
    x0 << std::log(1.0), std::log(init.phi),
        logit(std::clamp((init.kappa - kKappaLo) / (kKappaHi - kKappaLo), 0.01, 0.99)),
        std::log(2.0);

    std::vector<Eigen::VectorXd> starts{x0};
    Rng rng(opts.seed);
    for (int s = 0; s < opts.multistarts; ++s) {
        Eigen::VectorXd x = x0;
        for (int i = 0; i < 4; ++i) {
            const double factor = 1.0 + opts.jitter * (2.0 * rng.uniform() - 1.0);
            if (i == 2) {
                double kappa = kKappaLo + (kKappaHi - kKappaLo) * sigmoid(x[i]);
                kappa = std::clamp(kappa * factor, kKappaLo + 1e-3, kKappaHi - 1e-3);
                x[i] = logit((kappa - kKappaLo) / (kKappaHi - kKappaLo));
            } else {
                x[i] += std::log(factor);
            }
        }
        starts.push_back(std::move(x));
    }

    std::vector<std::future<NelderMeadResult>> futures;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        futures.push_back(std::async(std::launch::async, [&, s]() {
            NelderMeadOptions nm;
            nm.tol = opts.tol;
            nm.max_iter = opts.max_iter;
            if (s == 0) nm.trace = opts.trace;
            NelderMeadResult r = nelder_mead(neg_ll, starts[s], nm);
            // restart with a fresh simplex at the optimum until no further
            // improvement; the simplex can stall on the shallow lambda-gamma
            // ridge well short of the maximum
            nm.trace = nullptr;
            for (int restart = 0; restart < 4 && std::isfinite(r.fval); ++restart) {
                const auto again = nelder_mead(neg_ll, r.x, nm);
                if (again.fval < r.fval - 1e-9)
                    r = again;
                else
                    break;
            }
            return r;
        }));
    }
    NelderMeadResult best;
    bool have = false;
    for (auto& f : futures) {
        const auto r = f.get();
        if (!std::isfinite(r.fval)) continue;
        if (!have || r.fval < best.fval) {
            best = r;
            have = true;
        }
    }
    if (!have) throw fit_error("fit_truncated_gamma: all starts failed");

    double lambda, phi, kappa, gamma;
    decode(best.x, lambda, phi, kappa, gamma);
    FittedGeometricModel model{
        GaugeParams(lambda, phi, kappa, gamma, init.c_tau, tau, dplane_coords),
        -best.fval, best.iterations, best.simplex_spread, best.converged, 0};
    return model;
}

std::pair<FittedGeometricModel, ExceedanceSet> finalize_model(const Eigen::MatrixXd& exp_data,
                                                              const FittedGeometricModel& fitted) {
    const GaugeParams& p = fitted.params;
    std::vector<double> radii, gauges;
    for (Eigen::Index t = 0; t < exp_data.rows(); ++t) {
        const Eigen::VectorXd z = exp_data.row(t);
        const double r = z.sum();
        if (r <= 0.0) continue;
        radii.push_back(r);
        gauges.push_back(p.threshold_gauge(z / r));
    }
    const double c_tau = calibrate_c_tau(radii, gauges, p.tau());
    FittedGeometricModel out = fitted;
    out.params = GaugeParams(p.lambda(), p.phi(), p.kappa(), p.gamma(), c_tau, p.tau(),
                             p.dplane_coords());
    ExceedanceSet exc = make_exceedance_set(exp_data, out.params);
    return {std::move(out), std::move(exc)};
}

}  // namespace gex
