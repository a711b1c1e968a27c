#include "gpilc/dynamics.hpp"

#include <cmath>
#include <string>

#include "gpilc/errors.hpp"
#include "gpilc/rng.hpp"

namespace gpilc::dyn {

namespace {

Eigen::Index common_horizon(const std::vector<TrialRecord>& trials) {
    if (trials.empty())
        throw std::invalid_argument("at least one trial required");
    const Eigen::Index n = trials.front().input.size();
    for (const TrialRecord& t : trials) {
        if (t.input.size() != n || t.output.size() != n)
            throw std::invalid_argument("trials disagree on horizon N");
    }
    if (n < 2) throw std::invalid_argument("horizon must be at least 2");
    return n;
}

double pooled_input_std(const std::vector<TrialRecord>& trials) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (const TrialRecord& t : trials) {
        sum += t.input.sum();
        count += t.input.size();
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const TrialRecord& t : trials)
        sq += (t.input.array() - mean).square().sum();
    return std::sqrt(sq / static_cast<double>(count));
}

// Per-dimension GP mean and its gradient w.r.t. the query vector.
struct MeanAndGrad {
    double mean;
    Eigen::VectorXd grad;
};

MeanAndGrad ard_mean_grad(const gp::GPModel& model, const Eigen::VectorXd& query) {
    const Eigen::MatrixXd& design = model.dataset.design;
    const Eigen::Index dim = design.rows();
    const Eigen::Index count = design.cols();
    Eigen::VectorXd kvec(count);
    for (Eigen::Index k = 0; k < count; ++k)
        kvec[k] = gp::sek_ard(query, design.col(k), model.params.length_scales);
    const Eigen::VectorXd w = model.alpha.cwiseProduct(kvec);
    const double wsum = w.sum();
    MeanAndGrad out;
    out.mean = model.dataset.target_shift + model.dataset.target_scale * wsum;
    out.grad.resize(dim);
    const Eigen::VectorXd vw = design * w;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double l = model.params.length_scales[i];
        out.grad[i] = -model.dataset.target_scale * (query[i] * wsum - vw[i]) / (l * l);
    }
    return out;
}

}  // namespace

bool state_output_consistent(const TrialRecord& trial,
                             const Eigen::RowVectorXd& output_row, double tol) {
    if (!trial.state) return false;
    const Eigen::RowVectorXd mapped = output_row * (*trial.state);
    return (mapped.transpose() - trial.output).cwiseAbs().maxCoeff() <= tol;
}

gp::GPDataset build_io_dataset(const std::vector<TrialRecord>& trials) {
    const Eigen::Index n = common_horizon(trials);
    const Eigen::Index k = static_cast<Eigen::Index>(trials.size()) * n;
    gp::GPDataset ds;
    ds.design = Eigen::MatrixXd::Zero(n, k);
    ds.targets.resize(k);
    Eigen::Index col = 0;
    for (const TrialRecord& t : trials) {
        for (Eigen::Index sample = 1; sample <= n; ++sample, ++col) {
            // v_n = [u(n-1), ..., u(1), 0, ..., 0]
            for (Eigen::Index i = 1; i < sample; ++i)
                ds.design(i - 1, col) = t.input[sample - i - 1];
            ds.targets[col] = t.output[sample - 1];
        }
    }
    return ds;
}

std::vector<gp::GPDataset> build_is_dataset(const std::vector<TrialRecord>& trials) {
    const Eigen::Index n = common_horizon(trials);
    Eigen::Index state_dim = -1;
    for (const TrialRecord& t : trials) {
        if (!t.state)
            throw std::invalid_argument("build_is_dataset: trial lacks state data");
        if (t.state->cols() != n)
            throw std::invalid_argument("build_is_dataset: state column count != N");
        if (state_dim < 0) state_dim = t.state->rows();
        if (t.state->rows() != state_dim)
            throw std::invalid_argument("build_is_dataset: state dimension mismatch");
    }
    const Eigen::Index k = static_cast<Eigen::Index>(trials.size()) * (n - 1);
    Eigen::MatrixXd design(state_dim + 1, k);
    Eigen::MatrixXd targets(state_dim, k);
    Eigen::Index col = 0;
    for (const TrialRecord& t : trials) {
        for (Eigen::Index sample = 0; sample + 1 < n; ++sample, ++col) {
            design.block(0, col, state_dim, 1) = t.state->col(sample);
            design(state_dim, col) = t.input[sample];
            targets.col(col) = t.state->col(sample + 1);
        }
    }
    std::vector<gp::GPDataset> out(static_cast<std::size_t>(state_dim));
    for (Eigen::Index m = 0; m < state_dim; ++m) {
        out[static_cast<std::size_t>(m)].design = design;
        out[static_cast<std::size_t>(m)].targets = targets.row(m).transpose();
    }
    return out;
}

Eigen::MatrixXd io_regressors(const Eigen::VectorXd& u) {
    const Eigen::Index n = u.size();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index sample = 1; sample <= n; ++sample)
        for (Eigen::Index i = 1; i < sample; ++i)
            q(i - 1, sample - 1) = u[sample - i - 1];
    return q;
}

IOModel fit_io_model(const std::vector<TrialRecord>& trials,
                     const gp::FitConfig& config) {
    IOModel model;
    model.horizon = common_horizon(trials);
    gp::GPDataset ds = build_io_dataset(trials);
    const double stddev = pooled_input_std(trials);
    model.regressor_scale = (stddev > 1e-12) ? 1.0 / stddev : 1.0;
    ds.design *= model.regressor_scale;
    model.gp = gp::gp_fit(ds, gp::KernelKind::SharedSek, config);
    return model;
}

ISModel fit_is_model(const std::vector<TrialRecord>& trials,
                     const Eigen::RowVectorXd& output_row,
                     const gp::FitConfig& config,
                     const std::vector<gp::KernelParams>* warm_starts) {
    std::vector<gp::GPDataset> datasets = build_is_dataset(trials);
    const Eigen::Index state_dim = static_cast<Eigen::Index>(datasets.size());
    if (output_row.size() != state_dim)
        throw std::invalid_argument("fit_is_model: output row dimension mismatch");
    if (warm_starts && static_cast<Eigen::Index>(warm_starts->size()) != state_dim)
        throw std::invalid_argument("fit_is_model: warm start count mismatch");

    ISModel model;
    model.horizon = common_horizon(trials);
    model.output_row = output_row;
    model.gps.resize(static_cast<std::size_t>(state_dim));
    // Independent targets over a shared design; fits may run concurrently.
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index m = 0; m < state_dim; ++m) {
        gp::FitConfig cfg = config;
        cfg.seed = rng::derive(config.seed, "is_dim", static_cast<std::uint64_t>(m));
        if (warm_starts) cfg.warm_start = (*warm_starts)[static_cast<std::size_t>(m)];
        model.gps[static_cast<std::size_t>(m)] =
            gp::gp_fit(datasets[static_cast<std::size_t>(m)], gp::KernelKind::ArdSek, cfg);
    }
    return model;
}

Eigen::VectorXd io_predict(const IOModel& model, const Eigen::VectorXd& u) {
    if (u.size() != model.horizon)
        throw std::invalid_argument("io_predict: input length mismatch");
    const Eigen::MatrixXd queries = model.regressor_scale * io_regressors(u);
    return gp::predict_mean(model.gp, queries);
}

Rollout rollout_with(const OneStep& step, const Eigen::RowVectorXd& output_row,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& initial_state) {
    const Eigen::Index n = u.size();
    const Eigen::Index state_dim = output_row.size();
    if (initial_state.size() != state_dim)
        throw std::invalid_argument("rollout: initial state dimension mismatch");
    Rollout out;
    out.state.resize(state_dim, n);
    out.state.col(0) = initial_state;
    for (Eigen::Index sample = 0; sample + 1 < n; ++sample) {
        out.state.col(sample + 1) = step(out.state.col(sample), u[sample]);
        if (!out.state.col(sample + 1).allFinite())
            throw NumericalError("rollout: non-finite state at sample " +
                                 std::to_string(sample + 2));
    }
    out.output = (output_row * out.state).transpose();
    return out;
}

Rollout is_rollout(const ISModel& model, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& initial_state) {
    const Eigen::Index state_dim = model.output_row.size();
    Eigen::VectorXd query(state_dim + 1);
    Eigen::VectorXd next(state_dim);
    const OneStep step = [&](const Eigen::VectorXd& x, double uin) {
        query.head(state_dim) = x;
        query[state_dim] = uin;
        for (Eigen::Index m = 0; m < state_dim; ++m)
            next[m] = gp::predict_mean(model.gps[static_cast<std::size_t>(m)], query)[0];
        return next;
    };
    return rollout_with(step, model.output_row, u, initial_state);
}

LiftedJacobian linearize_io(const IOModel& model, const Eigen::VectorXd& u) {
    if (u.size() != model.horizon)
        throw std::invalid_argument("linearize_io: input length mismatch");
    const Eigen::Index n = model.horizon;
    const Eigen::MatrixXd queries = model.regressor_scale * io_regressors(u);
    const Eigen::MatrixXd& design = model.gp.dataset.design;
    const double l = model.gp.params.length_scales[0];
    const double coeff =
        model.gp.dataset.target_scale * model.regressor_scale / (l * l);

    LiftedJacobian jac;
    jac.P = Eigen::MatrixXd::Zero(n, n);
    // Rows are independent; each needs the kernel vector of its own query.
#pragma omp parallel for schedule(static)
    for (Eigen::Index row = 1; row < n; ++row) {
        const Eigen::VectorXd q = queries.col(row);
        Eigen::VectorXd kvec(design.cols());
        for (Eigen::Index k = 0; k < design.cols(); ++k)
            kvec[k] = gp::sek_shared(q, design.col(k), l);
        const Eigen::VectorXd w = model.gp.alpha.cwiseProduct(kvec);
        const double wsum = w.sum();
        const Eigen::VectorXd vw = design * w;
        // d yhat(row+1) / d u(m+1) via regressor slot i = row - m
        for (Eigen::Index col = 0; col < row; ++col) {
            const Eigen::Index slot = row - col - 1;
            jac.P(row, col) = -coeff * (q[slot] * wsum - vw[slot]);
        }
    }
    return jac;
}

LiftedJacobian linearize_is(const ISModel& model, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& initial_state) {
    const Eigen::Index n = u.size();
    const Eigen::Index state_dim = model.output_row.size();
    Rollout roll = is_rollout(model, u, initial_state);

    // Forward pass: one-step Jacobians at the rollout points.
    std::vector<Eigen::MatrixXd> a_step(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    std::vector<Eigen::VectorXd> b_step(a_step.size());
    Eigen::VectorXd query(state_dim + 1);
    for (Eigen::Index sample = 0; sample + 1 < n; ++sample) {
        query.head(state_dim) = roll.state.col(sample);
        query[state_dim] = u[sample];
        Eigen::MatrixXd a(state_dim, state_dim);
        Eigen::VectorXd b(state_dim);
        for (Eigen::Index m = 0; m < state_dim; ++m) {
            const MeanAndGrad mg =
                ard_mean_grad(model.gps[static_cast<std::size_t>(m)], query);
            a.row(m) = mg.grad.head(state_dim).transpose();
            b[m] = mg.grad[state_dim];
        }
        a_step[static_cast<std::size_t>(sample)] = std::move(a);
        b_step[static_cast<std::size_t>(sample)] = std::move(b);
    }

    LiftedJacobian jac;
    jac.P = lifted_from_one_step(a_step, b_step, model.output_row);
    return jac;
}

Eigen::MatrixXd lifted_from_one_step(const std::vector<Eigen::MatrixXd>& a_steps,
                                     const std::vector<Eigen::VectorXd>& b_steps,
                                     const Eigen::RowVectorXd& output_row) {
    if (a_steps.size() != b_steps.size())
        throw std::invalid_argument("lifted_from_one_step: step count mismatch");
    const Eigen::Index n = static_cast<Eigen::Index>(a_steps.size()) + 1;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    // Column m propagates S_{k+1} = A_k S_k + B_k [k == m]; columns are
    // independent given the one-step Jacobians.
    const Eigen::Index last_col = n - 1;
#pragma omp parallel for schedule(static)
    for (Eigen::Index col = 0; col < last_col; ++col) {
        Eigen::VectorXd sens = b_steps[static_cast<std::size_t>(col)];
        p(col + 1, col) = output_row.dot(sens);
        for (Eigen::Index sample = col + 1; sample + 1 < n; ++sample) {
            sens = a_steps[static_cast<std::size_t>(sample)] * sens;
            p(sample + 1, col) = output_row.dot(sens);
        }
    }
    return p;
}

std::vector<TrialRecord> truncate_history(const std::vector<TrialRecord>& trials,
                                          int history) {
    if (history < 1) throw std::invalid_argument("truncate_history: H must be >= 1");
    const std::size_t keep =
        std::min(trials.size(), static_cast<std::size_t>(history));
    return std::vector<TrialRecord>(trials.end() - static_cast<std::ptrdiff_t>(keep),
                                    trials.end());
}

}  // namespace gpilc::dyn
