#ifndef GPILC_DYNAMICS_HPP
#define GPILC_DYNAMICS_HPP

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gpilc/gp.hpp"

namespace gpilc::dyn {

// One executed trial. Outputs/inputs are length-N sample vectors; the state
// matrix, when present, holds x(n) in column n-1.
struct TrialRecord {
    int index = 0;
    Eigen::VectorXd input;
    Eigen::VectorXd output;
    std::optional<Eigen::MatrixXd> state;
    std::optional<Eigen::VectorXd> initial_state;
};

// Checks output = output_row * state columnwise within tolerance.
bool state_output_consistent(const TrialRecord& trial,
                             const Eigen::RowVectorXd& output_row, double tol);

// Lifted input/output regression set: for sample n the regression vector is
// [u(n-1), ..., u(1), 0, ..., 0] and the target is y(n). Columns are ordered
// trial by trial, sample by sample.
gp::GPDataset build_io_dataset(const std::vector<TrialRecord>& trials);

// One-step state regression sets: regression vector [x(n); u(n)], m-th
// dataset target [x(n+1)]_m, for n in [1, N-1]. All datasets share the same
// design matrix.
std::vector<gp::GPDataset> build_is_dataset(const std::vector<TrialRecord>& trials);

// Regressor columns for a full input trajectory (query layout of the IO
// model); column n-1 is the regression vector of sample n, unscaled.
Eigen::MatrixXd io_regressors(const Eigen::VectorXd& u);

struct IOModel {
    gp::GPModel gp;
    Eigen::Index horizon = 0;
    // Shared scalar applied to regression vectors before kernel evaluation
    // (1 / std of the training inputs).
    double regressor_scale = 1.0;
};

struct ISModel {
    std::vector<gp::GPModel> gps;  // one per state dimension
    Eigen::RowVectorXd output_row;
    Eigen::Index horizon = 0;
};

IOModel fit_io_model(const std::vector<TrialRecord>& trials,
                     const gp::FitConfig& config = {});

// warm_starts, when given, must hold one KernelParams per state dimension.
ISModel fit_is_model(const std::vector<TrialRecord>& trials,
                     const Eigen::RowVectorXd& output_row,
                     const gp::FitConfig& config = {},
                     const std::vector<gp::KernelParams>* warm_starts = nullptr);

Eigen::VectorXd io_predict(const IOModel& model, const Eigen::VectorXd& u);

struct Rollout {
    Eigen::VectorXd output;  // length N
    Eigen::MatrixXd state;   // M x N
};

// One-step state predictor x(n+1) = f(x(n), u(n)).
using OneStep = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// Rollout machinery shared by the GP path and exact-model substitutions.
Rollout rollout_with(const OneStep& step, const Eigen::RowVectorXd& output_row,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& initial_state);

Rollout is_rollout(const ISModel& model, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& initial_state);

// N x N sensitivity of predicted outputs w.r.t. input samples.
struct LiftedJacobian {
    Eigen::MatrixXd P;
};

LiftedJacobian linearize_io(const IOModel& model, const Eigen::VectorXd& u);
LiftedJacobian linearize_is(const ISModel& model, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& initial_state);

// Sensitivity propagation S_{n+1,m} = A_n S_{n,m} + B_n [n = m] with
// P(n, m) = C S_{n,m}; a_steps/b_steps hold one entry per transition.
Eigen::MatrixXd lifted_from_one_step(const std::vector<Eigen::MatrixXd>& a_steps,
                                     const std::vector<Eigen::VectorXd>& b_steps,
                                     const Eigen::RowVectorXd& output_row);

// Most recent min(H, count) trials, order preserved.
std::vector<TrialRecord> truncate_history(const std::vector<TrialRecord>& trials,
                                          int history);

}  // namespace gpilc::dyn

#endif
