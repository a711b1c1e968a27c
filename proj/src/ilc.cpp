#include "gpilc/ilc.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "gpilc/errors.hpp"
#include "gpilc/rng.hpp"
#include "gpilc/signal_tools.hpp"

namespace gpilc::ilc {

Variant variant_from_string(const std::string& name) {
    if (name == "io") return Variant::IO;
    if (name == "is") return Variant::IS;
    throw ConfigError("unknown variant: " + name + " (expected io or is)");
}

std::string to_string(Variant v) { return v == Variant::IO ? "io" : "is"; }

WeightPair compute_weights(const dyn::LiftedJacobian& jacobian, Variant variant) {
    const Eigen::MatrixXd& p = jacobian.P;
    if (!p.allFinite())
        throw std::invalid_argument("compute_weights: non-finite jacobian");
    const Eigen::Index n = p.rows();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(p);
    const double spectral = svd.singularValues()(0);
    if (spectral <= 1e-12 * static_cast<double>(n))
        throw DegenerateModelError("compute_weights: ||P||_2 is numerically zero");
    const double c = (variant == Variant::IO) ? 1.0 : 0.1;
    WeightPair w;
    w.W = Eigen::MatrixXd::Identity(n, n);
    w.S = (c * spectral * spectral) * Eigen::MatrixXd::Identity(n, n);
    return w;
}

LearningGain learning_gain(const dyn::LiftedJacobian& jacobian,
                           const WeightPair& weights) {
    const Eigen::MatrixXd& p = jacobian.P;
    const Eigen::MatrixXd normal = p.transpose() * weights.W * p + weights.S;
    const Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
        throw NumericalError("learning_gain: normal matrix factorization failed");
    LearningGain gain;
    gain.L = llt.solve(weights.W * p.transpose());
    return gain;
}

Eigen::VectorXd update_input(const Eigen::VectorXd& u, const Eigen::VectorXd& e,
                             const LearningGain& gain) {
    if (u.size() != e.size() || gain.L.rows() != u.size() || gain.L.cols() != e.size())
        throw std::invalid_argument("update_input: length mismatch");
    return u + gain.L * e;
}

Eigen::VectorXd initial_input(const Eigen::VectorXd& reference,
                              const InitConfig& config, double fs) {
    if (reference.norm() == 0.0)
        throw std::invalid_argument("initial_input: zero reference");
    if (!(config.input_variance > 0.0))
        throw std::invalid_argument("initial_input: input variance must be positive");
    const double f0 = sig::significant_frequency(reference, fs, config.power_threshold);
    rng::Rng draws(rng::derive(config.seed, "initial_input"));
    Eigen::VectorXd u =
        draws.normal_vector(reference.size(), std::sqrt(config.input_variance));
    // A brickwall at or above Nyquist is the identity.
    if (f0 < fs / 2.0) u = sig::zero_phase_lowpass(u, f0, fs);
    return u;
}

double auto_input_variance(const TrialProbe& probe, double noise_floor,
                           const InitConfig& config,
                           const Eigen::VectorXd& reference, double fs) {
    if (noise_floor < 0.0)
        throw std::invalid_argument("auto_input_variance: negative noise floor");
    double variance = config.input_variance;
    for (int attempt = 0; attempt <= config.max_doublings; ++attempt) {
        InitConfig candidate = config;
        candidate.input_variance = variance;
        candidate.seed = rng::derive(config.seed, "probe", static_cast<std::uint64_t>(attempt));
        const Eigen::VectorXd u = initial_input(reference, candidate, fs);
        const Eigen::VectorXd y = probe(u);
        const double mean = y.mean();
        const double stddev = std::sqrt((y.array() - mean).square().mean());
        if (stddev >= config.excitation_factor * noise_floor) return variance;
        variance *= 2.0;
    }
    throw ActuationIneffectiveError(
        "auto_input_variance: excitation never exceeded the noise floor after " +
        std::to_string(config.max_doublings) + " doublings");
}

}  // namespace gpilc::ilc
