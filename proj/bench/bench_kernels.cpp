// Timing comparison of the OpenMP kernels against the plain-loop reference.
#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "gpilc/dynamics.hpp"
#include "gpilc/gp.hpp"
#include "gpilc/rng.hpp"
#include "gpilc/serial_ref.hpp"

using namespace gpilc;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

dyn::IOModel random_io_model(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
    rng::Rng draws(seed);
    gp::GPDataset ds;
    ds.design.resize(n, k);
    ds.targets.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) ds.design(i, j) = draws.normal();
        ds.targets[j] = draws.normal();
    }
    gp::KernelParams params;
    params.length_scales = Eigen::VectorXd::Constant(1, 2.0);
    params.noise_variance = 1e-2;
    dyn::IOModel model;
    model.gp = gp::make_model(ds, params, gp::KernelKind::SharedSek);
    model.horizon = n;
    model.regressor_scale = 1.0;
    return model;
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());
    std::printf("%-28s %8s %8s %8s\n", "kernel", "serial", "openmp", "speedup");

    rng::Rng draws(7);
    for (const Eigen::Index k : {120L, 240L, 480L}) {
        const Eigen::Index d = 50;
        Eigen::MatrixXd a(d, k);
        for (Eigen::Index j = 0; j < k; ++j)
            for (Eigen::Index i = 0; i < d; ++i) a(i, j) = draws.normal();
        gp::KernelParams params;
        params.length_scales = Eigen::VectorXd::Constant(1, 1.5);
        params.noise_variance = 1e-2;
        const double serial = time_ms(
            [&] { serial_ref::kernel_matrix(a, a, params, gp::KernelKind::SharedSek); }, 5);
        const double parallel = time_ms(
            [&] { gp::kernel_matrix(a, a, params, gp::KernelKind::SharedSek); }, 5);
        std::printf("kernel_matrix K=%-4ld         %7.2f  %7.2f  %7.2fx\n",
                    static_cast<long>(k), serial, parallel, serial / parallel);
    }

    for (const Eigen::Index n : {50L, 100L}) {
        const dyn::IOModel model = random_io_model(n, 3 * n, 11);
        Eigen::VectorXd u(n);
        for (Eigen::Index i = 0; i < n; ++i) u[i] = draws.normal();
        const double serial =
            time_ms([&] { serial_ref::linearize_io(model, u); }, 3);
        const double parallel = time_ms([&] { dyn::linearize_io(model, u); }, 3);
        std::printf("linearize_io N=%-4ld          %7.2f  %7.2f  %7.2fx\n",
                    static_cast<long>(n), serial, parallel, serial / parallel);
    }
    return 0;
}
