#ifndef GPILC_PLANT_HPP
#define GPILC_PLANT_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "gpilc/dynamics.hpp"

namespace gpilc::plant {

enum class PlantId { Cube, Twipr, Pendu, Linear };

PlantId plant_id_from_string(const std::string& name);
std::string to_string(PlantId id);

struct PlantSpec {
    PlantId id = PlantId::Linear;
    int state_dim = 0;
    Eigen::RowVectorXd output_row;
    double fs = 50.0;
    int substeps = 10;
    double output_noise_std = 0.0;
    double state_noise_std = 0.0;
    double divergence_bound = 1e3;
    std::optional<std::pair<double, double>> input_bounds;
    std::optional<Eigen::VectorXd> feedback_gain;  // u_total = u - k^T x
    std::map<std::string, double> physical;        // named constants
    // Continuous-time system matrices, LINEAR only.
    std::optional<Eigen::MatrixXd> lin_a;
    std::optional<Eigen::MatrixXd> lin_b;

    double physical_at(const std::string& key) const;
};

using PlantLibrary = std::map<std::string, PlantSpec>;

PlantLibrary load_plant_library(const std::string& path);
void save_plant_library(const PlantLibrary& lib, const std::string& path);
PlantSpec load_plant(const std::string& path, PlantId id);
// Reads from the checked-in default parameter file.
PlantSpec default_plant(PlantId id);
std::string default_params_path();

// Continuous-time state derivative.
Eigen::VectorXd plant_dynamics(const PlantSpec& spec, const Eigen::VectorXd& x,
                               double u);

using Derivative = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// Classical 4th-order Runge-Kutta step with zero-order-hold input.
Eigen::VectorXd rk4_step(const Derivative& derivative, const Eigen::VectorXd& x,
                         double u, double dt);

struct SimTrialResult {
    dyn::TrialRecord record;
    // Post-feedback, post-saturation actuation per sample (diagnostics).
    Eigen::VectorXd applied_input;
};

// Integrates a full trial from rest. The LINEAR plant steps by its exact
// zero-order-hold discretization; the testbeds integrate RK4 substeps at
// dt = 1/(fs * substeps). Output noise is added when noise_on.
SimTrialResult run_trial(const PlantSpec& spec, const Eigen::VectorXd& u,
                         std::uint64_t seed, bool noise_on);

// Closed-form lifted map of the LINEAR plant: P(n, m) = C A_d^{n-1-m} B_d for
// m < n, zero elsewhere.
Eigen::MatrixXd lifted_matrix_linear(const PlantSpec& spec, Eigen::Index n);

// Exact zero-order-hold discretization at step dt.
void zoh_discretize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt,
                    Eigen::MatrixXd& a_d, Eigen::MatrixXd& b_d);

}  // namespace gpilc::plant

#endif
