#include "gpilc/plant.hpp"

#include <cmath>
#include <fstream>

#include <unsupported/Eigen/MatrixFunctions>
#include <nlohmann/json.hpp>

#include "gpilc/errors.hpp"
#include "gpilc/rng.hpp"

namespace gpilc::plant {

using nlohmann::json;

PlantId plant_id_from_string(const std::string& name) {
    if (name == "cube") return PlantId::Cube;
    if (name == "twipr") return PlantId::Twipr;
    if (name == "pendu") return PlantId::Pendu;
    if (name == "linear") return PlantId::Linear;
    throw ConfigError("unknown plant id: " + name);
}

std::string to_string(PlantId id) {
    switch (id) {
        case PlantId::Cube: return "cube";
        case PlantId::Twipr: return "twipr";
        case PlantId::Pendu: return "pendu";
        case PlantId::Linear: return "linear";
    }
    throw ConfigError("invalid plant id");
}

double PlantSpec::physical_at(const std::string& key) const {
    const auto it = physical.find(key);
    if (it == physical.end())
        throw ConfigError("plant '" + to_string(id) + "' missing parameter: " + key);
    return it->second;
}

namespace {

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.size();
    if (rows == 0) throw ParseError("empty matrix in plant file");
    const auto cols = j.at(0).size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (j.at(r).size() != cols)
            throw ParseError("ragged matrix in plant file");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                j.at(r).at(c).get<double>();
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(std::move(row));
    }
    return j;
}

PlantSpec spec_from_json(const std::string& name, const json& j) {
    PlantSpec spec;
    spec.id = plant_id_from_string(name);
    spec.state_dim = j.at("state_dim").get<int>();
    const auto& row = j.at("output_row");
    spec.output_row.resize(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i)
        spec.output_row[static_cast<Eigen::Index>(i)] = row.at(i).get<double>();
    spec.fs = j.at("fs").get<double>();
    spec.substeps = j.value("substeps", 10);
    spec.output_noise_std = j.value("output_noise_std", 0.0);
    spec.state_noise_std = j.value("state_noise_std", 0.0);
    spec.divergence_bound = j.value("divergence_bound", 1e3);
    if (j.contains("input_bounds") && !j.at("input_bounds").is_null()) {
        const auto& b = j.at("input_bounds");
        spec.input_bounds = {b.at(0).get<double>(), b.at(1).get<double>()};
    }
    if (j.contains("feedback_gain") && !j.at("feedback_gain").is_null()) {
        const auto& g = j.at("feedback_gain");
        Eigen::VectorXd gain(static_cast<Eigen::Index>(g.size()));
        for (std::size_t i = 0; i < g.size(); ++i)
            gain[static_cast<Eigen::Index>(i)] = g.at(i).get<double>();
        spec.feedback_gain = std::move(gain);
    }
    if (j.contains("physical"))
        for (const auto& [key, value] : j.at("physical").items())
            spec.physical[key] = value.get<double>();
    if (j.contains("A")) spec.lin_a = matrix_from_json(j.at("A"));
    if (j.contains("B")) spec.lin_b = matrix_from_json(j.at("B"));

    if (spec.output_row.size() != spec.state_dim)
        throw ParseError("plant '" + name + "': output_row size != state_dim");
    if (spec.id == PlantId::Linear && (!spec.lin_a || !spec.lin_b))
        throw ParseError("linear plant requires A and B matrices");
    return spec;
}

json spec_to_json(const PlantSpec& spec) {
    json j;
    j["state_dim"] = spec.state_dim;
    json row = json::array();
    for (Eigen::Index i = 0; i < spec.output_row.size(); ++i)
        row.push_back(spec.output_row[i]);
    j["output_row"] = std::move(row);
    j["fs"] = spec.fs;
    j["substeps"] = spec.substeps;
    j["output_noise_std"] = spec.output_noise_std;
    j["state_noise_std"] = spec.state_noise_std;
    j["divergence_bound"] = spec.divergence_bound;
    if (spec.input_bounds)
        j["input_bounds"] = {spec.input_bounds->first, spec.input_bounds->second};
    if (spec.feedback_gain) {
        json gain = json::array();
        for (Eigen::Index i = 0; i < spec.feedback_gain->size(); ++i)
            gain.push_back((*spec.feedback_gain)[i]);
        j["feedback_gain"] = std::move(gain);
    }
    if (!spec.physical.empty()) {
        json phys;
        for (const auto& [key, value] : spec.physical) phys[key] = value;
        j["physical"] = std::move(phys);
    }
    if (spec.lin_a) j["A"] = matrix_to_json(*spec.lin_a);
    if (spec.lin_b) j["B"] = matrix_to_json(*spec.lin_b);
    return j;
}

// Cached exact discretization of the LINEAR plant at the sample period.
struct LinearDiscrete {
    Eigen::MatrixXd a_d;
    Eigen::MatrixXd b_d;
};

LinearDiscrete linear_discrete(const PlantSpec& spec) {
    LinearDiscrete d;
    zoh_discretize(*spec.lin_a, *spec.lin_b, 1.0 / spec.fs, d.a_d, d.b_d);
    return d;
}

}  // namespace

PlantLibrary load_plant_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("plant parameter file not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("plant parameter file " + path + ": " + e.what());
    }
    PlantLibrary lib;
    for (const auto& [name, body] : j.items())
        lib[name] = spec_from_json(name, body);
    return lib;
}

void save_plant_library(const PlantLibrary& lib, const std::string& path) {
    json j;
    for (const auto& [name, spec] : lib) j[name] = spec_to_json(spec);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plant parameter file: " + path);
    out << j.dump(2) << "\n";
}

PlantSpec load_plant(const std::string& path, PlantId id) {
    PlantLibrary lib = load_plant_library(path);
    const auto it = lib.find(to_string(id));
    if (it == lib.end())
        throw NotFoundError("plant '" + to_string(id) + "' not in " + path);
    return it->second;
}

std::string default_params_path() { return GPILC_DEFAULT_PLANT_PARAMS; }

PlantSpec default_plant(PlantId id) {
    return load_plant(default_params_path(), id);
}

Eigen::VectorXd plant_dynamics(const PlantSpec& spec, const Eigen::VectorXd& x,
                               double u) {
    if (x.size() != spec.state_dim)
        throw std::invalid_argument("plant_dynamics: state dimension mismatch");
    Eigen::VectorXd dx(spec.state_dim);
    switch (spec.id) {
        case PlantId::Linear: {
            dx = (*spec.lin_a) * x + (*spec.lin_b) * u;
            break;
        }
        case PlantId::Cube: {
            // Reaction-wheel pendulum, state (alpha, alpha_dot, wheel_speed):
            //   (J_p + J_w) alpha_dd = m g l sin(alpha) - d_p alpha_dot - u
            //   J_w wheel_dd = u - d_w wheel_speed
            const double m = spec.physical_at("mass");
            const double l = spec.physical_at("com_length");
            const double g = spec.physical_at("gravity");
            const double jp = spec.physical_at("body_inertia");
            const double jw = spec.physical_at("wheel_inertia");
            const double dp = spec.physical_at("body_damping");
            const double dw = spec.physical_at("wheel_damping");
            dx[0] = x[1];
            dx[1] = (m * g * l * std::sin(x[0]) - dp * x[1] - u) / (jp + jw);
            dx[2] = (u - dw * x[2]) / jw;
            break;
        }
        case PlantId::Twipr: {
            // Planar wheeled inverted pendulum, state (pitch, pitch_dot, s,
            // s_dot). Wheel torque u pushes the chassis (u / r_w) and reacts
            // on the body (-u).
            const double mb = spec.physical_at("body_mass");
            const double mw = spec.physical_at("wheel_mass");
            const double rw = spec.physical_at("wheel_radius");
            const double l = spec.physical_at("com_height");
            const double ib = spec.physical_at("body_inertia");
            const double iw = spec.physical_at("wheel_inertia");
            const double g = spec.physical_at("gravity");
            const double dth = spec.physical_at("pitch_damping");
            const double ds = spec.physical_at("drive_damping");
            const double theta = x[0];
            const double theta_dot = x[1];
            const double s_dot = x[3];
            const double mt = mb + mw + iw / (rw * rw);
            const double it = ib + mb * l * l;
            const double c = mb * l * std::cos(theta);
            Eigen::Matrix2d mass;
            mass << mt, c, c, it;
            Eigen::Vector2d rhs;
            rhs[0] = mb * l * theta_dot * theta_dot * std::sin(theta) + u / rw -
                     ds * s_dot;
            rhs[1] = mb * g * l * std::sin(theta) - u - dth * theta_dot;
            const Eigen::Vector2d acc = mass.inverse() * rhs;  // (s_dd, theta_dd)
            dx[0] = theta_dot;
            dx[1] = acc[1];
            dx[2] = s_dot;
            dx[3] = acc[0];
            break;
        }
        case PlantId::Pendu: {
            // Two-link pendulum hanging down, torque on joint 1, state
            // (alpha, alpha_dot, beta, beta_dot) with beta relative.
            const double m1 = spec.physical_at("link1_mass");
            const double m2 = spec.physical_at("link2_mass");
            const double l1 = spec.physical_at("link1_length");
            const double lc1 = spec.physical_at("link1_com");
            const double lc2 = spec.physical_at("link2_com");
            const double i1 = spec.physical_at("link1_inertia");
            const double i2 = spec.physical_at("link2_inertia");
            const double g = spec.physical_at("gravity");
            const double d1 = spec.physical_at("joint1_damping");
            const double d2 = spec.physical_at("joint2_damping");
            const double alpha = x[0];
            const double alpha_dot = x[1];
            const double beta = x[2];
            const double beta_dot = x[3];
            const double m11 = i1 + i2 + m1 * lc1 * lc1 +
                               m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(beta));
            const double m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * std::cos(beta));
            const double m22 = i2 + m2 * lc2 * lc2;
            const double h = -m2 * l1 * lc2 * std::sin(beta);
            const double c1 = h * (2.0 * alpha_dot * beta_dot + beta_dot * beta_dot);
            const double c2 = -h * alpha_dot * alpha_dot;
            const double g1 = (m1 * lc1 + m2 * l1) * g * std::sin(alpha) +
                              m2 * lc2 * g * std::sin(alpha + beta);
            const double g2 = m2 * lc2 * g * std::sin(alpha + beta);
            Eigen::Matrix2d mass;
            mass << m11, m12, m12, m22;
            Eigen::Vector2d rhs;
            rhs[0] = u - d1 * alpha_dot - c1 - g1;
            rhs[1] = -d2 * beta_dot - c2 - g2;
            const Eigen::Vector2d acc = mass.inverse() * rhs;
            dx[0] = alpha_dot;
            dx[1] = acc[0];
            dx[2] = beta_dot;
            dx[3] = acc[1];
            break;
        }
    }
    return dx;
}

Eigen::VectorXd rk4_step(const Derivative& derivative, const Eigen::VectorXd& x,
                         double u, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    const Eigen::VectorXd k1 = derivative(x, u);
    const Eigen::VectorXd k2 = derivative(x + 0.5 * dt * k1, u);
    const Eigen::VectorXd k3 = derivative(x + 0.5 * dt * k2, u);
    const Eigen::VectorXd k4 = derivative(x + dt * k3, u);
    Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite())
        throw DivergenceError("rk4_step: non-finite state", 0);
    return next;
}

void zoh_discretize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt,
                    Eigen::MatrixXd& a_d, Eigen::MatrixXd& b_d) {
    const Eigen::Index n = a.rows();
    const Eigen::Index m = b.cols();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a;
    aug.topRightCorner(n, m) = b;
    const Eigen::MatrixXd e = (aug * dt).exp();
    a_d = e.topLeftCorner(n, n);
    b_d = e.topRightCorner(n, m);
}

SimTrialResult run_trial(const PlantSpec& spec, const Eigen::VectorXd& u,
                         std::uint64_t seed, bool noise_on) {
    const Eigen::Index n = u.size();
    if (n < 1) throw std::invalid_argument("run_trial: empty input");
    const Eigen::Index state_dim = spec.state_dim;

    SimTrialResult result;
    result.record.input = u;
    result.applied_input.resize(n);
    Eigen::MatrixXd states = Eigen::MatrixXd::Zero(state_dim, n);

    std::optional<LinearDiscrete> lin;
    if (spec.id == PlantId::Linear) lin = linear_discrete(spec);
    const double dt = 1.0 / (spec.fs * static_cast<double>(spec.substeps));
    const Derivative deriv = [&spec](const Eigen::VectorXd& x, double uin) {
        return plant_dynamics(spec, x, uin);
    };

    rng::Rng state_noise(rng::derive(seed, "state_noise"));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(state_dim);
    for (Eigen::Index sample = 0; sample < n; ++sample) {
        double ut = u[sample];
        if (spec.feedback_gain) ut -= spec.feedback_gain->dot(x);
        if (spec.input_bounds)
            ut = std::clamp(ut, spec.input_bounds->first, spec.input_bounds->second);
        result.applied_input[sample] = ut;
        states.col(sample) = x;
        if (sample + 1 == n) break;

        if (lin) {
            x = lin->a_d * x + lin->b_d * Eigen::VectorXd::Constant(1, ut);
        } else {
            for (int sub = 0; sub < spec.substeps; ++sub) {
                try {
                    x = rk4_step(deriv, x, ut, dt);
                } catch (const DivergenceError&) {
                    throw DivergenceError(
                        "run_trial: " + to_string(spec.id) +
                            " diverged (non-finite) at sample " +
                            std::to_string(sample + 2),
                        static_cast<int>(sample + 2));
                }
            }
        }
        if (noise_on && spec.state_noise_std > 0.0)
            x += state_noise.normal_vector(state_dim, spec.state_noise_std);
        if (x.cwiseAbs().maxCoeff() > spec.divergence_bound)
            throw DivergenceError("run_trial: " + to_string(spec.id) +
                                      " exceeded state bound at sample " +
                                      std::to_string(sample + 2),
                                  static_cast<int>(sample + 2));
    }

    Eigen::VectorXd y = (spec.output_row * states).transpose();
    if (noise_on && spec.output_noise_std > 0.0) {
        rng::Rng out_noise(rng::derive(seed, "output_noise"));
        y += out_noise.normal_vector(n, spec.output_noise_std);
    }
    result.record.output = std::move(y);
    result.record.state = std::move(states);
    result.record.initial_state = Eigen::VectorXd::Zero(state_dim);
    return result;
}

Eigen::MatrixXd lifted_matrix_linear(const PlantSpec& spec, Eigen::Index n) {
    if (spec.id != PlantId::Linear)
        throw std::invalid_argument("lifted_matrix_linear: LINEAR plant only");
    const LinearDiscrete d = linear_discrete(spec);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    // First column of impulse responses: C A_d^k B_d, k = 0..n-2
    Eigen::MatrixXd akb = d.b_d;
    std::vector<double> markov(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        markov[static_cast<std::size_t>(k)] = (spec.output_row * akb)(0, 0);
        akb = d.a_d * akb;
    }
    for (Eigen::Index row = 1; row < n; ++row)
        for (Eigen::Index col = 0; col < row; ++col)
            p(row, col) = markov[static_cast<std::size_t>(row - col - 1)];
    return p;
}

}  // namespace gpilc::plant
