#include "gpilc/serial_ref.hpp"

#include <vector>

namespace gpilc::serial_ref {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const gp::KernelParams& params, gp::KernelKind kind) {
    Eigen::MatrixXd out(A.cols(), B.cols());
    for (Eigen::Index i = 0; i < A.cols(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j)
            out(i, j) = (kind == gp::KernelKind::SharedSek)
                            ? gp::sek_shared(A.col(i), B.col(j), params.length_scales[0])
                            : gp::sek_ard(A.col(i), B.col(j), params.length_scales);
    return out;
}

dyn::LiftedJacobian linearize_io(const dyn::IOModel& model, const Eigen::VectorXd& u) {
    const Eigen::Index n = u.size();
    const Eigen::MatrixXd queries = model.regressor_scale * dyn::io_regressors(u);
    const Eigen::MatrixXd& design = model.gp.dataset.design;
    const double l = model.gp.params.length_scales[0];
    const double coeff =
        model.gp.dataset.target_scale * model.regressor_scale / (l * l);

    dyn::LiftedJacobian jac;
    jac.P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index row = 1; row < n; ++row) {
        for (Eigen::Index col = 0; col < row; ++col) {
            const Eigen::Index slot = row - col - 1;
            double acc = 0.0;
            for (Eigen::Index k = 0; k < design.cols(); ++k) {
                const double kval = gp::sek_shared(queries.col(row), design.col(k), l);
                acc += model.gp.alpha[k] * kval *
                       (queries(slot, row) - design(slot, k));
            }
            jac.P(row, col) = -coeff * acc;
        }
    }
    return jac;
}

dyn::LiftedJacobian linearize_is(const dyn::ISModel& model, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& initial_state) {
    const Eigen::Index n = u.size();
    const Eigen::Index state_dim = model.output_row.size();
    const dyn::Rollout roll = dyn::is_rollout(model, u, initial_state);

    std::vector<Eigen::MatrixXd> a_step;
    std::vector<Eigen::VectorXd> b_step;
    Eigen::VectorXd query(state_dim + 1);
    for (Eigen::Index sample = 0; sample + 1 < n; ++sample) {
        query.head(state_dim) = roll.state.col(sample);
        query[state_dim] = u[sample];
        Eigen::MatrixXd a(state_dim, state_dim);
        Eigen::VectorXd b(state_dim);
        for (Eigen::Index m = 0; m < state_dim; ++m) {
            const gp::GPModel& g = model.gps[static_cast<std::size_t>(m)];
            const Eigen::MatrixXd& design = g.dataset.design;
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(state_dim + 1);
            for (Eigen::Index k = 0; k < design.cols(); ++k) {
                const double kval = gp::sek_ard(query, design.col(k), g.params.length_scales);
                for (Eigen::Index i = 0; i <= state_dim; ++i) {
                    const double l = g.params.length_scales[i];
                    grad[i] += g.alpha[k] * kval * (design(i, k) - query[i]) / (l * l);
                }
            }
            grad *= g.dataset.target_scale;
            a.row(m) = grad.head(state_dim).transpose();
            b[m] = grad[state_dim];
        }
        a_step.push_back(std::move(a));
        b_step.push_back(std::move(b));
    }

    dyn::LiftedJacobian jac;
    jac.P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index col = 0; col + 1 < n; ++col) {
        Eigen::VectorXd sens = b_step[static_cast<std::size_t>(col)];
        jac.P(col + 1, col) = model.output_row.dot(sens);
        for (Eigen::Index sample = col + 1; sample + 1 < n; ++sample) {
            sens = a_step[static_cast<std::size_t>(sample)] * sens;
            jac.P(sample + 1, col) = model.output_row.dot(sens);
        }
    }
    return jac;
}

}  // namespace gpilc::serial_ref
