#ifndef GPILC_SERIAL_REF_HPP
#define GPILC_SERIAL_REF_HPP

#include <Eigen/Core>

#include "gpilc/dynamics.hpp"
#include "gpilc/gp.hpp"

// Plain-loop reference implementations of the parallel kernels. Kept for
// testing (equality against the OpenMP paths) and for the benchmark target.
namespace gpilc::serial_ref {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const gp::KernelParams& params, gp::KernelKind kind);

dyn::LiftedJacobian linearize_io(const dyn::IOModel& model, const Eigen::VectorXd& u);

dyn::LiftedJacobian linearize_is(const dyn::ISModel& model, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& initial_state);

}  // namespace gpilc::serial_ref

#endif
