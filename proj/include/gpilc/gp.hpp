#ifndef GPILC_GP_HPP
#define GPILC_GP_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace gpilc::gp {

// Squared-exponential kernels with unit amplitude, so targets are
// standardized to zero mean / unit variance before fitting and predictions
// are mapped back to target units.
enum class KernelKind { SharedSek, ArdSek };

constexpr double kNoiseFloor = 1e-8;   // standardized units, fit lower bound
constexpr double kJitterBase = 1e-10;  // always added before factorization
constexpr double kJitterMax = 1e-4;    // escalation cap (x10 steps)
constexpr double kScaleFloor = 1e-8;   // target_scale floor (constant targets)

struct KernelParams {
    Eigen::VectorXd length_scales;  // one entry (shared) or one per dimension
    double noise_variance = 1e-2;   // in standardized target units
};

struct GPDataset {
    Eigen::MatrixXd design;   // D x K, one regression vector per column
    Eigen::VectorXd targets;  // length K, raw target units
    double target_shift = 0.0;
    double target_scale = 1.0;

    Eigen::Index dim() const { return design.rows(); }
    Eigen::Index count() const { return design.cols(); }
    Eigen::VectorXd standardized_targets() const {
        return (targets.array() - target_shift) / target_scale;
    }
};

// Fills target_shift/target_scale from the targets (population statistics,
// scale floored at kScaleFloor).
GPDataset standardized(GPDataset ds);

double sek_shared(const Eigen::VectorXd& v, const Eigen::VectorXd& v_hat,
                  double length_scale);
double sek_ard(const Eigen::VectorXd& v, const Eigen::VectorXd& v_hat,
               const Eigen::VectorXd& length_scales);

// Entry (i, j) is the kernel of column i of A and column j of B.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const KernelParams& params, KernelKind kind);

struct LogMarginal {
    double value;
    // Gradient over (log length scales..., log noise variance).
    Eigen::VectorXd gradient;
};

// Evaluated on standardized targets; the kernel matrix carries the base
// jitter on its diagonal (escalated on factorization failure).
LogMarginal log_marginal_likelihood(const GPDataset& dataset,
                                    const KernelParams& params, KernelKind kind);

struct FitConfig {
    int starts = 5;
    int max_iterations = 200;
    double gradient_tol = 1e-6;
    std::uint64_t seed = 0;
    std::optional<KernelParams> warm_start;  // appended as an extra start
};

struct FitReport {
    std::vector<KernelParams> start_points;
    int best_start = -1;
};

struct GPModel {
    GPDataset dataset;  // standardized metadata populated
    KernelParams params;
    KernelKind kind;
    Eigen::MatrixXd chol_lower;  // L with L L^T = K_VV + (sigma^2 + jitter) I
    Eigen::VectorXd alpha;       // (K_VV + sigma^2 I)^{-1} z_std
    double jitter = 0.0;
    double log_likelihood = 0.0;
};

// Builds the cached factorization for explicit hyperparameters, honoring the
// dataset's existing shift/scale.
GPModel make_model(const GPDataset& dataset, const KernelParams& params,
                   KernelKind kind);

// Evidence maximization: multi-start BFGS ascent in log-hyperparameter space.
// Deterministic for fixed (dataset, kind, config).
GPModel gp_fit(const GPDataset& dataset, KernelKind kind,
               const FitConfig& config = {}, FitReport* report = nullptr);

// Posterior mean in target units; queries are columns of Q.
Eigen::VectorXd predict_mean(const GPModel& model, const Eigen::MatrixXd& queries);

// Posterior covariance in target units (scaled by target_scale^2); diagonal
// clamped at zero.
Eigen::MatrixXd predict_cov(const GPModel& model, const Eigen::MatrixXd& queries);

}  // namespace gpilc::gp

#endif
