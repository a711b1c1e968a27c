#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gpilc/errors.hpp"
#include "gpilc/plant.hpp"
#include "gpilc/rng.hpp"
#include "gpilc/signal_tools.hpp"

using namespace gpilc;

namespace {

Eigen::VectorXd sinusoid(double freq_hz, double fs, Eigen::Index n,
                         double amplitude = 1.0) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
        x[i] = amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / fs);
    return x;
}

// Fraction of one-sided periodogram power at or below a frequency.
double power_fraction_below(const Eigen::VectorXd& x, double fs, double freq) {
    const Eigen::Index n = x.size();
    const Eigen::VectorXd c = x.array() - x.mean();
    double below = 0.0, total = 0.0;
    for (Eigen::Index k = 1; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * i) / n;
            re += c[i] * std::cos(ang);
            im += c[i] * std::sin(ang);
        }
        const double p = re * re + im * im;
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        total += p;
        if (f <= freq) below += p;
    }
    return below / total;
}

}  // namespace

TEST_CASE("error_trajectory basics") {
    Eigen::VectorXd r(2), y(2);
    r << 1.0, 2.0;
    y << 0.0, 0.0;
    CHECK(sig::error_trajectory(r, r).norm() == 0.0);
    const Eigen::VectorXd e = sig::error_trajectory(r, y);
    CHECK(e[0] == 1.0);
    CHECK(e[1] == 2.0);
    CHECK(sig::error_trajectory(r, y) == -sig::error_trajectory(y, r));
    Eigen::VectorXd bad(3);
    CHECK_THROWS_AS(sig::error_trajectory(r, bad), std::invalid_argument);
}

TEST_CASE("significant_frequency on spectral lines") {
    const double fs = 50.0;
    const Eigen::Index n = 200;
    const Eigen::VectorXd pure = sinusoid(2.0, fs, n);
    const double f0 = sig::significant_frequency(pure, fs);
    CHECK(f0 >= 2.0 - fs / n);
    CHECK(f0 <= 2.0 + fs / n);

    // 1 Hz amplitude 1 plus 5 Hz amplitude 0.05: the 1 Hz line carries
    // 1/(1+0.0025) ~ 99.75% of the power, above the 0.99 threshold.
    const Eigen::VectorXd mix = sinusoid(1.0, fs, n) + sinusoid(5.0, fs, n, 0.05);
    const double f_mix = sig::significant_frequency(mix, fs, 0.99);
    CHECK(f_mix <= 1.0 + fs / n);
    // A stricter threshold must include the 5 Hz line.
    const double f_strict = sig::significant_frequency(mix, fs, 0.999);
    CHECK(f_strict >= 5.0 - fs / n);

    CHECK_THROWS_AS(sig::significant_frequency(Eigen::VectorXd::Ones(50), fs),
                    std::invalid_argument);
}

TEST_CASE("significant_frequency of white noise sits near Nyquist") {
    const double fs = 50.0;
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        rng::Rng draws(seed);
        total += sig::significant_frequency(draws.normal_vector(400), fs, 0.99);
    }
    CHECK(total / 10.0 >= 0.9 * (fs / 2.0) * 0.99);
}

TEST_CASE("significant_frequency monotone in threshold") {
    rng::Rng draws(4);
    Eigen::VectorXd x = draws.normal_vector(128);
    double prev = 0.0;
    for (const double thr : {0.5, 0.9, 0.99, 0.999}) {
        const double f = sig::significant_frequency(x, 50.0, thr);
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("zero_phase_lowpass passband, stopband, idempotence") {
    const double fs = 50.0;
    const Eigen::Index n = 250;
    const Eigen::VectorXd low = sinusoid(1.0, fs, n);
    CHECK((sig::zero_phase_lowpass(low, 5.0, fs) - low).cwiseAbs().maxCoeff() <=
          1e-10);

    const Eigen::VectorXd high = sinusoid(10.0, fs, n);
    CHECK(sig::zero_phase_lowpass(high, 5.0, fs).cwiseAbs().maxCoeff() <= 1e-10);

    rng::Rng draws(8);
    const Eigen::VectorXd noise = draws.normal_vector(n);
    const Eigen::VectorXd once = sig::zero_phase_lowpass(noise, 5.0, fs);
    const Eigen::VectorXd twice = sig::zero_phase_lowpass(once, 5.0, fs);
    CHECK((twice - once).cwiseAbs().maxCoeff() <= 1e-12);

    // DC is untouched.
    const Eigen::VectorXd shifted = noise.array() + 3.0;
    CHECK(sig::zero_phase_lowpass(shifted, 5.0, fs).mean() ==
          doctest::Approx(shifted.mean()).epsilon(1e-12));

    CHECK_THROWS_AS(sig::zero_phase_lowpass(noise, 25.0, fs), std::invalid_argument);
    CHECK_THROWS_AS(sig::zero_phase_lowpass(noise, 0.0, fs), std::invalid_argument);
}

TEST_CASE("relative_error clamp") {
    Eigen::VectorXd r(4);
    r << 1.0, 1.0, 1.0, 1.0;  // norm 2

    // ||e||/||r|| = 0.15 with floor 0.05 -> 0.10
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e[0] = 0.3;
    const sig::ErrorMetrics a = sig::relative_error(e, r, 0.05);
    CHECK(a.relative_raw == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(a.relative == doctest::Approx(0.10).epsilon(1e-12));

    // Below the floor clamps to zero (TWIPR-style 12% floor).
    e[0] = 0.16;
    const sig::ErrorMetrics b = sig::relative_error(e, r, 0.12);
    CHECK(b.relative_raw == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(b.relative == 0.0);

    const sig::ErrorMetrics c = sig::relative_error(Eigen::VectorXd::Zero(4), r, 0.0);
    CHECK(c.relative == 0.0);

    CHECK_THROWS_AS(sig::relative_error(e, Eigen::VectorXd::Zero(4), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(sig::relative_error(e, r, -0.1), std::invalid_argument);

    // Monotone in the error norm.
    double prev = -1.0;
    for (double mag = 0.0; mag <= 1.0; mag += 0.1) {
        Eigen::VectorXd err = Eigen::VectorXd::Constant(4, mag);
        const double eps = sig::relative_error(err, r, 0.1).relative;
        CHECK(eps >= prev);
        prev = eps;
    }
}

TEST_CASE("max_repetitive_error") {
    Eigen::VectorXd r(3);
    r << 1.0, 2.0, 2.0;  // norm 3
    CHECK(sig::max_repetitive_error({r, r, r}, r) == 0.0);

    Eigen::VectorXd y = r;
    y[0] += 0.21;
    CHECK(sig::max_repetitive_error({y}, r) == doctest::Approx(0.07).epsilon(1e-12));

    CHECK_THROWS_AS(sig::max_repetitive_error({}, r), std::invalid_argument);
    CHECK_THROWS_AS(sig::max_repetitive_error({r}, Eigen::VectorXd::Zero(3)),
                    std::invalid_argument);
}

TEST_CASE("repeatability floor tracks the analytic noise norm") {
    // With output noise std sigma on the LINEAR plant the expected deviation
    // norm is sigma * sqrt(N); the max over 10 runs stays within a factor two.
    plant::PlantSpec spec = plant::default_plant(plant::PlantId::Linear);
    spec.output_noise_std = 0.01;
    const Eigen::Index n = 80;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const sig::Reference ref =
            sig::generate_reference(spec, seed, 2.0, 1.0, spec.fs, n);
        std::vector<Eigen::VectorXd> outputs;
        for (int run = 0; run < 10; ++run)
            outputs.push_back(plant::run_trial(spec, *ref.realizing_input,
                                               rng::derive(seed, "rep", run), true)
                                  .record.output);
        const double floor = sig::max_repetitive_error(outputs, ref.r);
        const double analytic =
            spec.output_noise_std * std::sqrt(static_cast<double>(n)) / ref.r.norm();
        CHECK(floor >= 0.5 * analytic);
        CHECK(floor <= 2.0 * analytic);
    }
}

TEST_CASE("generate_reference is deterministic and replayable") {
    const plant::PlantSpec spec = plant::default_plant(plant::PlantId::Pendu);
    const sig::Reference a = sig::generate_reference(spec, 42, 1.0, 4e-3, spec.fs, 60);
    const sig::Reference b = sig::generate_reference(spec, 42, 1.0, 4e-3, spec.fs, 60);
    CHECK(a.r == b.r);
    CHECK(*a.realizing_input == *b.realizing_input);

    // Replaying the realizing input reproduces the reference noise-free.
    const plant::SimTrialResult replay =
        plant::run_trial(spec, *a.realizing_input, 7, false);
    CHECK((replay.record.output - a.r).cwiseAbs().maxCoeff() <= 1e-10);

    // Zero input variance gives the free response from rest: all zero.
    const sig::Reference rest = sig::generate_reference(spec, 1, 1.0, 0.0, spec.fs, 60);
    CHECK(rest.r.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reference files round-trip") {
    const plant::PlantSpec spec = plant::default_plant(plant::PlantId::Cube);
    const sig::Reference ref = sig::generate_reference(spec, 9, 1.5, 1e-4, spec.fs, 50);
    const std::string csv = "build_test_ref.csv";
    const std::string js = "build_test_ref.json";
    sig::save_reference(ref, csv, js);
    const sig::Reference loaded = sig::load_reference(csv, js);
    CHECK(loaded.r == ref.r);
    CHECK(*loaded.realizing_input == *ref.realizing_input);
    CHECK(loaded.fs == ref.fs);
    CHECK(loaded.seed == ref.seed);
    CHECK(loaded.cutoff_hz == ref.cutoff_hz);
    CHECK(loaded.input_variance == ref.input_variance);
    CHECK(loaded.plant_id == ref.plant_id);

    // Truncated CSV reports the offending line.
    {
        std::ofstream bad(csv);
        bad << "n,r,u_realizing\n1,0.5\n";
    }
    CHECK_THROWS_AS(sig::load_reference(csv, js), ParseError);
    CHECK_THROWS_AS(sig::load_reference("missing_dir/none.csv", js), NotFoundError);
    std::filesystem::remove(csv);
    std::filesystem::remove(js);
}

TEST_CASE("initial-input spectrum check helper agrees with FFT path") {
    // The quadratic-time DFT used as the oracle in ILC tests must agree with
    // the FFT-based significant_frequency on a known signal.
    const double fs = 50.0;
    const Eigen::VectorXd x = sinusoid(1.0, fs, 100);
    CHECK(power_fraction_below(x, fs, 2.0) >= 0.99);
    CHECK(power_fraction_below(x, fs, 0.4) <= 0.05);
}
