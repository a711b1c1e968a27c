#ifndef GPILC_ILC_HPP
#define GPILC_ILC_HPP

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "gpilc/dynamics.hpp"

namespace gpilc::ilc {

enum class Variant { IO, IS };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

struct WeightPair {
    Eigen::MatrixXd W;  // error weighting
    Eigen::MatrixXd S;  // update weighting
};

struct LearningGain {
    Eigen::MatrixXd L;
};

struct InitConfig {
    double input_variance = 1e-4;
    double power_threshold = 0.99;
    double excitation_factor = 3.0;
    int max_doublings = 12;
    std::uint64_t seed = 0;
};

// W = I, S = c ||P||_2^2 I with c = 1 (IO) or 0.1 (IS). Throws
// DegenerateModelError when the model carries no gradient information.
WeightPair compute_weights(const dyn::LiftedJacobian& jacobian, Variant variant);

// L = (P^T W P + S)^{-1} W P^T via Cholesky of the regularized normal matrix.
LearningGain learning_gain(const dyn::LiftedJacobian& jacobian,
                           const WeightPair& weights);

Eigen::VectorXd update_input(const Eigen::VectorXd& u, const Eigen::VectorXd& e,
                             const LearningGain& gain);

// Seeded Gaussian trajectory low-passed at the reference's significant
// frequency. Deterministic per seed.
Eigen::VectorXd initial_input(const Eigen::VectorXd& reference,
                              const InitConfig& config, double fs);

using TrialProbe = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Doubles the input variance (one probe trial per candidate, filtered-noise
// candidates shaped like initial_input) until std(y) clears
// excitation_factor * noise_floor; throws ActuationIneffectiveError at the
// doubling cap.
double auto_input_variance(const TrialProbe& probe, double noise_floor,
                           const InitConfig& config,
                           const Eigen::VectorXd& reference, double fs);

}  // namespace gpilc::ilc

#endif
