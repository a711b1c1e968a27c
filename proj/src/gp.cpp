#include "gpilc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gpilc/errors.hpp"
#include "gpilc/rng.hpp"

namespace gpilc::gp {

namespace {

void check_params(const KernelParams& params, Eigen::Index dim, KernelKind kind) {
    if (kind == KernelKind::SharedSek) {
        if (params.length_scales.size() != 1)
            throw std::invalid_argument("shared SEK expects a single length scale");
    } else {
        if (params.length_scales.size() != dim)
            throw std::invalid_argument("ARD SEK expects one length scale per dimension");
    }
    for (Eigen::Index i = 0; i < params.length_scales.size(); ++i)
        if (!(params.length_scales[i] > 0.0))
            throw std::invalid_argument("length scales must be positive");
    if (!(params.noise_variance >= kJitterBase))
        throw std::invalid_argument("noise variance below jitter floor");
}

// Squared differences reused across hyperparameter evaluations. Shared-scale
// kernels need the total squared distance only; ARD needs one matrix per
// dimension.
struct DistanceCache {
    std::vector<Eigen::MatrixXd> sq_diff;
    Eigen::Index count = 0;
};

DistanceCache build_cache(const Eigen::MatrixXd& design, KernelKind kind) {
    const Eigen::Index d = design.rows();
    const Eigen::Index k = design.cols();
    DistanceCache cache;
    cache.count = k;
    if (kind == KernelKind::SharedSek) {
        Eigen::MatrixXd sq(k, k);
        for (Eigen::Index j = 0; j < k; ++j)
            for (Eigen::Index i = 0; i < k; ++i)
                sq(i, j) = (design.col(i) - design.col(j)).squaredNorm();
        cache.sq_diff.push_back(std::move(sq));
    } else {
        cache.sq_diff.reserve(d);
        for (Eigen::Index m = 0; m < d; ++m) {
            Eigen::MatrixXd sq(k, k);
            for (Eigen::Index j = 0; j < k; ++j)
                for (Eigen::Index i = 0; i < k; ++i) {
                    const double delta = design(m, i) - design(m, j);
                    sq(i, j) = delta * delta;
                }
            cache.sq_diff.push_back(std::move(sq));
        }
    }
    return cache;
}

Eigen::MatrixXd kernel_from_cache(const DistanceCache& cache,
                                  const KernelParams& params, KernelKind kind) {
    if (kind == KernelKind::SharedSek) {
        const double l = params.length_scales[0];
        return (-cache.sq_diff[0].array() / (2.0 * l * l)).exp();
    }
    Eigen::MatrixXd quad = Eigen::MatrixXd::Zero(cache.count, cache.count);
    for (std::size_t m = 0; m < cache.sq_diff.size(); ++m) {
        const double l = params.length_scales[static_cast<Eigen::Index>(m)];
        quad += cache.sq_diff[m] / (l * l);
    }
    return (-0.5 * quad.array()).exp();
}

struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    bool ok = false;
};

// Cholesky of Kmat + (sigma^2 + jitter) I with jitter escalation.
Factorization factorize(const Eigen::MatrixXd& kmat, double noise_variance) {
    Factorization f;
    for (double jitter = kJitterBase; jitter <= kJitterMax * (1.0 + 1e-12);
         jitter *= 10.0) {
        Eigen::MatrixXd sys = kmat;
        sys.diagonal().array() += noise_variance + jitter;
        f.llt.compute(sys);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = jitter;
            f.ok = true;
            return f;
        }
    }
    return f;
}

struct LmlEvaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;
    double jitter = 0.0;
    bool ok = false;
};

// Value and gradient of the log marginal likelihood over log-hyperparameters.
LmlEvaluation evaluate_lml(const DistanceCache& cache, const Eigen::VectorXd& z,
                           const KernelParams& params, KernelKind kind) {
    LmlEvaluation out;
    const Eigen::Index k = cache.count;
    const Eigen::MatrixXd kmat = kernel_from_cache(cache, params, kind);
    Factorization fac = factorize(kmat, params.noise_variance);
    if (!fac.ok) return out;

    const Eigen::VectorXd alpha = fac.llt.solve(z);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
        log_det += std::log(fac.llt.matrixLLT()(i, i));
    out.value = -0.5 * z.dot(alpha) - log_det -
                0.5 * static_cast<double>(k) * std::log(2.0 * M_PI);
    if (!std::isfinite(out.value)) return out;

    const Eigen::MatrixXd kinv =
        fac.llt.solve(Eigen::MatrixXd::Identity(k, k));
    // d LML / d theta = 0.5 tr((alpha alpha^T - Kinv) dK/dtheta)
    const Eigen::MatrixXd trace_core =
        alpha * alpha.transpose() - kinv;

    const Eigen::Index n_scales = params.length_scales.size();
    out.gradient.resize(n_scales + 1);
    for (Eigen::Index m = 0; m < n_scales; ++m) {
        const double l = params.length_scales[m];
        const Eigen::MatrixXd& sq =
            (kind == KernelKind::SharedSek) ? cache.sq_diff[0]
                                            : cache.sq_diff[static_cast<std::size_t>(m)];
        // dK/dlog l = K .* sq / l^2
        out.gradient[m] =
            0.5 * (trace_core.array() * kmat.array() * sq.array()).sum() / (l * l);
    }
    out.gradient[n_scales] =
        0.5 * params.noise_variance * (alpha.squaredNorm() - kinv.trace());
    out.jitter = fac.jitter;
    out.ok = out.gradient.allFinite();
    return out;
}

KernelParams params_from_log(const Eigen::VectorXd& log_theta) {
    KernelParams p;
    const Eigen::Index n = log_theta.size() - 1;
    p.length_scales = log_theta.head(n).array().exp();
    p.noise_variance = std::exp(log_theta[n]);
    return p;
}

struct OptOutcome {
    Eigen::VectorXd log_theta;
    double value = -std::numeric_limits<double>::infinity();
    bool ok = false;
};

// BFGS ascent on the log marginal likelihood with backtracking line search.
// The noise coordinate is projected onto [log(kNoiseFloor), inf).
OptOutcome bfgs_maximize(const DistanceCache& cache, const Eigen::VectorXd& z,
                         KernelKind kind, Eigen::VectorXd log_theta,
                         int max_iterations, double gradient_tol) {
    OptOutcome result;
    const Eigen::Index n = log_theta.size();
    const double log_noise_floor = std::log(kNoiseFloor);
    log_theta[n - 1] = std::max(log_theta[n - 1], log_noise_floor);

    LmlEvaluation cur = evaluate_lml(cache, z, params_from_log(log_theta), kind);
    if (!cur.ok) return result;

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    for (int iter = 0; iter < max_iterations; ++iter) {
        if (cur.gradient.norm() <= gradient_tol) break;

        Eigen::VectorXd direction = hinv * cur.gradient;  // ascent
        if (direction.dot(cur.gradient) <= 0.0) {
            hinv.setIdentity();
            direction = cur.gradient;
        }
        // Bound the log-space move per iteration; raw gradients can be huge
        // at poor initializations and would stall the line search.
        const double dmax = direction.cwiseAbs().maxCoeff();
        if (dmax > 2.0) direction *= 2.0 / dmax;

        // Backtracking Armijo line search on the ascent direction.
        const double slope = cur.gradient.dot(direction);
        double step = 1.0;
        Eigen::VectorXd next_theta;
        LmlEvaluation next;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            next_theta = log_theta + step * direction;
            next_theta[n - 1] = std::max(next_theta[n - 1], log_noise_floor);
            next = evaluate_lml(cache, z, params_from_log(next_theta), kind);
            if (next.ok && next.value >= cur.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        // Update in the minimization convention (gradient of -LML).
        const Eigen::VectorXd s = next_theta - log_theta;
        const Eigen::VectorXd y_min = cur.gradient - next.gradient;
        const double sy = s.dot(y_min);
        if (sy > 1e-12 * s.norm() * y_min.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd outer =
                Eigen::MatrixXd::Identity(n, n) - rho * s * y_min.transpose();
            hinv = outer * hinv * outer.transpose() + rho * s * s.transpose();
        }
        log_theta = next_theta;
        cur = next;
    }
    result.log_theta = log_theta;
    result.value = cur.value;
    result.ok = true;
    return result;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    return values[mid];
}

// Median pairwise distance per start-range dimension; 1.0 when degenerate.
Eigen::VectorXd start_distance_scales(const DistanceCache& cache, KernelKind kind) {
    const Eigen::Index dims =
        (kind == KernelKind::SharedSek) ? 1 : static_cast<Eigen::Index>(cache.sq_diff.size());
    Eigen::VectorXd scales(dims);
    for (Eigen::Index m = 0; m < dims; ++m) {
        const Eigen::MatrixXd& sq = cache.sq_diff[static_cast<std::size_t>(m)];
        std::vector<double> dist;
        dist.reserve(static_cast<std::size_t>(cache.count) *
                     static_cast<std::size_t>(std::max<Eigen::Index>(cache.count - 1, 0)) / 2);
        for (Eigen::Index j = 0; j < cache.count; ++j)
            for (Eigen::Index i = j + 1; i < cache.count; ++i)
                dist.push_back(std::sqrt(sq(i, j)));
        const double med = median(std::move(dist));
        scales[m] = (med > 1e-12) ? med : 1.0;
    }
    return scales;
}

}  // namespace

GPDataset standardized(GPDataset ds) {
    const double mean = ds.targets.mean();
    const double var = (ds.targets.array() - mean).square().mean();
    ds.target_shift = mean;
    ds.target_scale = std::max(std::sqrt(var), kScaleFloor);
    return ds;
}

double sek_shared(const Eigen::VectorXd& v, const Eigen::VectorXd& v_hat,
                  double length_scale) {
    if (v.size() != v_hat.size())
        throw std::invalid_argument("sek_shared: dimension mismatch");
    if (!(length_scale > 0.0))
        throw std::invalid_argument("sek_shared: nonpositive length scale");
    // Same accumulation order as sek_ard so the degenerate ARD case matches
    // bit for bit.
    double quad = 0.0;
    for (Eigen::Index m = 0; m < v.size(); ++m) {
        const double delta = v[m] - v_hat[m];
        quad += (delta * delta) / (length_scale * length_scale);
    }
    return std::exp(-0.5 * quad);
}

double sek_ard(const Eigen::VectorXd& v, const Eigen::VectorXd& v_hat,
               const Eigen::VectorXd& length_scales) {
    if (v.size() != v_hat.size() || v.size() != length_scales.size())
        throw std::invalid_argument("sek_ard: dimension mismatch");
    double quad = 0.0;
    for (Eigen::Index m = 0; m < v.size(); ++m) {
        if (!(length_scales[m] > 0.0))
            throw std::invalid_argument("sek_ard: nonpositive length scale");
        const double delta = v[m] - v_hat[m];
        quad += (delta * delta) / (length_scales[m] * length_scales[m]);
    }
    return std::exp(-0.5 * quad);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const KernelParams& params, KernelKind kind) {
    if (A.rows() != B.rows())
        throw std::invalid_argument("kernel_matrix: row dimension mismatch");
    check_params(params, A.rows(), kind);
    Eigen::MatrixXd out(A.cols(), B.cols());
    const Eigen::Index cols = B.cols();
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < A.cols(); ++i) {
            out(i, j) = (kind == KernelKind::SharedSek)
                            ? sek_shared(A.col(i), B.col(j), params.length_scales[0])
                            : sek_ard(A.col(i), B.col(j), params.length_scales);
        }
    }
    return out;
}

LogMarginal log_marginal_likelihood(const GPDataset& dataset,
                                    const KernelParams& params, KernelKind kind) {
    if (dataset.count() < 1)
        throw std::invalid_argument("log_marginal_likelihood: empty dataset");
    check_params(params, dataset.dim(), kind);
    const DistanceCache cache = build_cache(dataset.design, kind);
    LmlEvaluation eval =
        evaluate_lml(cache, dataset.standardized_targets(), params, kind);
    if (!eval.ok)
        throw NumericalError("log_marginal_likelihood: factorization failed");
    return {eval.value, eval.gradient};
}

GPModel make_model(const GPDataset& dataset, const KernelParams& params,
                   KernelKind kind) {
    if (dataset.count() < 1)
        throw std::invalid_argument("make_model: empty dataset");
    if (!dataset.design.allFinite() || !dataset.targets.allFinite())
        throw std::invalid_argument("make_model: non-finite data");
    if (!(dataset.target_scale > 0.0))
        throw std::invalid_argument("make_model: nonpositive target scale");
    check_params(params, dataset.dim(), kind);

    GPModel model;
    model.dataset = dataset;
    model.params = params;
    model.kind = kind;

    const Eigen::MatrixXd kmat =
        kernel_matrix(dataset.design, dataset.design, params, kind);
    Factorization fac = factorize(kmat, params.noise_variance);
    if (!fac.ok)
        throw NumericalError("make_model: factorization failed after jitter escalation");
    const Eigen::VectorXd z = dataset.standardized_targets();
    model.chol_lower = fac.llt.matrixL();
    model.alpha = fac.llt.solve(z);
    model.jitter = fac.jitter;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < dataset.count(); ++i)
        log_det += std::log(model.chol_lower(i, i));
    model.log_likelihood = -0.5 * z.dot(model.alpha) - log_det -
                           0.5 * static_cast<double>(dataset.count()) *
                               std::log(2.0 * M_PI);
    return model;
}

GPModel gp_fit(const GPDataset& dataset, KernelKind kind, const FitConfig& config,
               FitReport* report) {
    if (dataset.count() < 1)
        throw std::invalid_argument("gp_fit: empty dataset");
    if (!dataset.design.allFinite() || !dataset.targets.allFinite())
        throw std::invalid_argument("gp_fit: non-finite data");

    GPDataset std_ds = standardized(dataset);
    const Eigen::VectorXd z = std_ds.standardized_targets();
    const DistanceCache cache = build_cache(std_ds.design, kind);
    const Eigen::Index n_scales =
        (kind == KernelKind::SharedSek) ? 1 : std_ds.dim();
    const Eigen::VectorXd dist = start_distance_scales(cache, kind);

    rng::Rng draws(config.seed);
    std::vector<Eigen::VectorXd> starts;
    starts.reserve(static_cast<std::size_t>(config.starts) + 1);
    for (int s = 0; s < config.starts; ++s) {
        Eigen::VectorXd theta(n_scales + 1);
        for (Eigen::Index m = 0; m < n_scales; ++m)
            theta[m] = std::log(draws.log_uniform(0.1 * dist[m], 10.0 * dist[m]));
        theta[n_scales] = std::log(draws.log_uniform(1e-4, 1e-1));
        starts.push_back(std::move(theta));
    }
    if (config.warm_start) {
        const KernelParams& w = *config.warm_start;
        if (w.length_scales.size() == n_scales && w.noise_variance > 0.0 &&
            (w.length_scales.array() > 0.0).all()) {
            Eigen::VectorXd theta(n_scales + 1);
            theta.head(n_scales) = w.length_scales.array().log();
            theta[n_scales] = std::log(std::max(w.noise_variance, kNoiseFloor));
            starts.push_back(std::move(theta));
        }
    }

    // Starts are independent pure evaluations; the argmax pick is
    // order-invariant, so this is deterministic for any thread count.
    std::vector<OptOutcome> outcomes(starts.size());
    const Eigen::Index n_starts = static_cast<Eigen::Index>(starts.size());
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index s = 0; s < n_starts; ++s) {
        outcomes[static_cast<std::size_t>(s)] =
            bfgs_maximize(cache, z, kind, starts[static_cast<std::size_t>(s)],
                          config.max_iterations, config.gradient_tol);
    }

    int best = -1;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        if (!outcomes[s].ok) continue;
        if (best < 0 || outcomes[s].value > outcomes[static_cast<std::size_t>(best)].value)
            best = static_cast<int>(s);
    }
    if (best < 0)
        throw NumericalError("gp_fit: no start produced a finite likelihood");

    if (report) {
        report->start_points.clear();
        for (const Eigen::VectorXd& theta : starts)
            report->start_points.push_back(params_from_log(theta));
        report->best_start = best;
    }
    return make_model(std_ds,
                      params_from_log(outcomes[static_cast<std::size_t>(best)].log_theta),
                      kind);
}

Eigen::VectorXd predict_mean(const GPModel& model, const Eigen::MatrixXd& queries) {
    if (queries.rows() != model.dataset.dim())
        throw std::invalid_argument("predict_mean: query dimension mismatch");
    const Eigen::MatrixXd kq =
        kernel_matrix(queries, model.dataset.design, model.params, model.kind);
    return (model.dataset.target_shift + (model.dataset.target_scale * (kq * model.alpha).array()))
        .matrix();
}

Eigen::MatrixXd predict_cov(const GPModel& model, const Eigen::MatrixXd& queries) {
    if (queries.rows() != model.dataset.dim())
        throw std::invalid_argument("predict_cov: query dimension mismatch");
    const Eigen::MatrixXd kqq =
        kernel_matrix(queries, queries, model.params, model.kind);
    const Eigen::MatrixXd kqv =
        kernel_matrix(queries, model.dataset.design, model.params, model.kind);
    const Eigen::MatrixXd half =
        model.chol_lower.triangularView<Eigen::Lower>().solve(kqv.transpose());
    Eigen::MatrixXd cov = kqq - half.transpose() * half;
    cov = 0.5 * (cov + cov.transpose());
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        if (cov(i, i) < 0.0) cov(i, i) = 0.0;
    const double s2 = model.dataset.target_scale * model.dataset.target_scale;
    return s2 * cov;
}

}  // namespace gpilc::gp
