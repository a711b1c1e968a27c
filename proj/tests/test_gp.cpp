#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "gpilc/errors.hpp"
#include "gpilc/gp.hpp"
#include "gpilc/rng.hpp"

using namespace gpilc;

namespace {

gp::GPDataset random_dataset(Eigen::Index dim, Eigen::Index count,
                             std::uint64_t seed) {
    rng::Rng draws(seed);
    gp::GPDataset ds;
    ds.design.resize(dim, count);
    ds.targets.resize(count);
    for (Eigen::Index j = 0; j < count; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) ds.design(i, j) = draws.normal();
        ds.targets[j] = draws.normal();
    }
    return ds;
}

gp::KernelParams shared_params(double l, double noise) {
    gp::KernelParams p;
    p.length_scales = Eigen::VectorXd::Constant(1, l);
    p.noise_variance = noise;
    return p;
}

// Dense-inverse evaluation of the posterior, the oracle for the cached
// factorization path. Includes the same jitter the model used.
Eigen::VectorXd dense_mean(const gp::GPModel& model, const Eigen::MatrixXd& q) {
    const Eigen::MatrixXd kvv = gp::kernel_matrix(model.dataset.design,
                                                  model.dataset.design,
                                                  model.params, model.kind);
    Eigen::MatrixXd sys = kvv;
    sys.diagonal().array() += model.params.noise_variance + model.jitter;
    const Eigen::MatrixXd kqv =
        gp::kernel_matrix(q, model.dataset.design, model.params, model.kind);
    const Eigen::VectorXd mu_std =
        kqv * sys.inverse() * model.dataset.standardized_targets();
    return model.dataset.target_shift +
           (model.dataset.target_scale * mu_std.array()).matrix().array();
}

Eigen::MatrixXd dense_cov(const gp::GPModel& model, const Eigen::MatrixXd& q) {
    const Eigen::MatrixXd kvv = gp::kernel_matrix(model.dataset.design,
                                                  model.dataset.design,
                                                  model.params, model.kind);
    Eigen::MatrixXd sys = kvv;
    sys.diagonal().array() += model.params.noise_variance + model.jitter;
    const Eigen::MatrixXd kqv =
        gp::kernel_matrix(q, model.dataset.design, model.params, model.kind);
    const Eigen::MatrixXd kqq = gp::kernel_matrix(q, q, model.params, model.kind);
    const double s2 = model.dataset.target_scale * model.dataset.target_scale;
    return s2 * (kqq - kqv * sys.inverse() * kqv.transpose());
}

}  // namespace

TEST_CASE("sek_shared closed-form values") {
    Eigen::VectorXd v(2), w(2);
    v << 1.0, 2.0;
    w = v;
    CHECK(gp::sek_shared(v, w, 1.0) == doctest::Approx(1.0));

    v << 1.0, 1.0;
    w << 0.0, 0.0;  // squared distance 2
    CHECK(gp::sek_shared(v, w, 1.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-12));

    v << 1.0, 0.0;
    w << 0.0, 1.0;
    CHECK(gp::sek_shared(v, w, 2.0) ==
          doctest::Approx(0.7788007830714049).epsilon(1e-12));

    Eigen::VectorXd bad(3);
    bad.setZero();
    CHECK_THROWS_AS(gp::sek_shared(v, bad, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gp::sek_shared(v, w, 0.0), std::invalid_argument);
}

TEST_CASE("sek_ard values and degenerate case") {
    Eigen::VectorXd v(2), w(2), scales(2);
    v << 0.3, -0.7;
    w = v;
    scales << 1.0, 2.0;
    CHECK(gp::sek_ard(v, w, scales) == doctest::Approx(1.0));

    v << 1.0, 0.0;
    w << 0.0, 0.0;
    scales << 1.0, 10.0;
    CHECK(gp::sek_ard(v, w, scales) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-12));

    // All scales equal reduces to the shared kernel exactly.
    rng::Rng draws(3);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd a = draws.normal_vector(4);
        Eigen::VectorXd b = draws.normal_vector(4);
        const double l = 0.5 + draws.uniform01();
        CHECK(gp::sek_ard(a, b, Eigen::VectorXd::Constant(4, l)) ==
              gp::sek_shared(a, b, l));
    }

    Eigen::VectorXd bad_scales(2);
    bad_scales << 1.0, -1.0;
    CHECK_THROWS_AS(gp::sek_ard(v, w, bad_scales), std::invalid_argument);
}

TEST_CASE("kernel_matrix structure and elementwise oracle") {
    const gp::KernelParams params = shared_params(1.3, 1e-2);

    Eigen::MatrixXd single(2, 1);
    single << 0.4, -0.2;
    const Eigen::MatrixXd one = gp::kernel_matrix(single, single, params,
                                                  gp::KernelKind::SharedSek);
    CHECK(one.rows() == 1);
    CHECK(one(0, 0) == doctest::Approx(1.0));

    const gp::GPDataset ds = random_dataset(3, 7, 17);
    const Eigen::MatrixXd self = gp::kernel_matrix(ds.design, ds.design, params,
                                                   gp::KernelKind::SharedSek);
    CHECK((self - self.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index i = 0; i < self.rows(); ++i)
        CHECK(self(i, i) == doctest::Approx(1.0).epsilon(1e-14));

    const gp::GPDataset a = random_dataset(3, 2, 5);
    const gp::GPDataset b = random_dataset(3, 3, 6);
    const Eigen::MatrixXd cross =
        gp::kernel_matrix(a.design, b.design, params, gp::KernelKind::SharedSek);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            CHECK(cross(i, j) ==
                  gp::sek_shared(a.design.col(i), b.design.col(j), 1.3));

    Eigen::MatrixXd wrong(4, 2);
    wrong.setZero();
    CHECK_THROWS_AS(
        gp::kernel_matrix(a.design, wrong, params, gp::KernelKind::SharedSek),
        std::invalid_argument);
}

TEST_CASE("log marginal likelihood scalar closed form") {
    gp::GPDataset ds;
    ds.design = Eigen::MatrixXd::Zero(1, 1);
    ds.targets = Eigen::VectorXd::Zero(1);
    const gp::KernelParams params = shared_params(1.0, 1.0);
    const gp::LogMarginal lm =
        gp::log_marginal_likelihood(ds, params, gp::KernelKind::SharedSek);
    const double expected = -0.5 * std::log(2.0) - 0.5 * std::log(2.0 * M_PI);
    CHECK(lm.value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("log marginal likelihood gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(seed % 5);
        gp::GPDataset ds = random_dataset(dim, 10, seed);
        const gp::KernelKind kind =
            (seed % 2 == 0) ? gp::KernelKind::SharedSek : gp::KernelKind::ArdSek;
        gp::KernelParams params;
        rng::Rng draws(seed + 100);
        const Eigen::Index n_scales = (kind == gp::KernelKind::SharedSek) ? 1 : dim;
        params.length_scales.resize(n_scales);
        for (Eigen::Index i = 0; i < n_scales; ++i)
            params.length_scales[i] = draws.log_uniform(0.5, 3.0);
        params.noise_variance = draws.log_uniform(1e-3, 1e-1);

        const gp::LogMarginal lm = gp::log_marginal_likelihood(ds, params, kind);
        const double h = 1e-5;
        for (Eigen::Index p = 0; p <= n_scales; ++p) {
            const auto value_at = [&](double delta) {
                gp::KernelParams perturbed = params;
                if (p < n_scales)
                    perturbed.length_scales[p] *= std::exp(delta);
                else
                    perturbed.noise_variance *= std::exp(delta);
                return gp::log_marginal_likelihood(ds, perturbed, kind).value;
            };
            const double fd = (value_at(h) - value_at(-h)) / (2.0 * h);
            const double scale = std::max(std::abs(fd), 1e-8);
            CHECK(std::abs(lm.gradient[p] - fd) / scale <= 1e-5);
        }
    }
}

TEST_CASE("log marginal likelihood decays with absurd noise") {
    const gp::GPDataset ds = random_dataset(2, 8, 42);
    const gp::KernelKind kind = gp::KernelKind::SharedSek;
    double previous = gp::log_marginal_likelihood(ds, shared_params(1.0, 1e2), kind).value;
    for (const double noise : {1e4, 1e6}) {
        const double value =
            gp::log_marginal_likelihood(ds, shared_params(1.0, noise), kind).value;
        CHECK(value < previous);
        previous = value;
    }
}

TEST_CASE("gp_fit handles a constant target") {
    gp::GPDataset ds;
    ds.design = Eigen::MatrixXd::Zero(2, 1);
    ds.targets = Eigen::VectorXd::Constant(1, 5.0);
    const gp::GPModel model = gp::gp_fit(ds, gp::KernelKind::SharedSek);
    CHECK(model.dataset.target_scale == doctest::Approx(gp::kScaleFloor));
    const Eigen::VectorXd mu = gp::predict_mean(model, ds.design);
    CHECK(mu[0] == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("gp_fit recovers the generating length scale") {
    // Targets drawn from a known SEK GP (l = 0.5, noise 0.01); the generator
    // is the oracle. Expect the fitted scale within a factor of two in at
    // least 80% of 20 seeded repetitions.
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        rng::Rng draws(seed);
        gp::GPDataset ds;
        ds.design.resize(1, 60);
        for (Eigen::Index i = 0; i < 60; ++i) ds.design(0, i) = draws.uniform(0.0, 5.0);
        const gp::KernelParams truth = shared_params(0.5, 0.01);
        Eigen::MatrixXd cov = gp::kernel_matrix(ds.design, ds.design, truth,
                                                gp::KernelKind::SharedSek);
        cov.diagonal().array() += truth.noise_variance;
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        REQUIRE(llt.info() == Eigen::Success);
        ds.targets = Eigen::MatrixXd(llt.matrixL()) * draws.normal_vector(60);

        gp::FitConfig cfg;
        cfg.seed = seed;
        const gp::GPModel model = gp::gp_fit(ds, gp::KernelKind::SharedSek, cfg);
        const double fitted = model.params.length_scales[0];
        if (fitted >= 0.25 && fitted <= 1.0) ++hits;
    }
    CHECK(hits >= 16);
}

TEST_CASE("gp_fit beats every multi-start initial point") {
    const gp::GPDataset ds = random_dataset(3, 12, 7);
    gp::FitConfig cfg;
    cfg.seed = 11;
    gp::FitReport report;
    const gp::GPModel model = gp::gp_fit(ds, gp::KernelKind::ArdSek, cfg, &report);
    REQUIRE(report.start_points.size() == 5);
    const double fitted =
        gp::log_marginal_likelihood(model.dataset, model.params, model.kind).value;
    for (const gp::KernelParams& init : report.start_points) {
        const double at_init =
            gp::log_marginal_likelihood(model.dataset, init, model.kind).value;
        CHECK(fitted >= at_init - 1e-9);
    }
}

TEST_CASE("gp_fit rejects non-finite data") {
    gp::GPDataset ds = random_dataset(2, 4, 9);
    ds.targets[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gp::gp_fit(ds, gp::KernelKind::SharedSek), std::invalid_argument);
}

TEST_CASE("gp_fit is deterministic") {
    const gp::GPDataset ds = random_dataset(2, 15, 23);
    gp::FitConfig cfg;
    cfg.seed = 77;
    const gp::GPModel a = gp::gp_fit(ds, gp::KernelKind::SharedSek, cfg);
    const gp::GPModel b = gp::gp_fit(ds, gp::KernelKind::SharedSek, cfg);
    CHECK(a.params.length_scales == b.params.length_scales);
    CHECK(a.params.noise_variance == b.params.noise_variance);
}

TEST_CASE("posterior mean: interpolation and scalar form") {
    // Noise at the jitter floor interpolates the (standardized) targets.
    gp::GPDataset ds = random_dataset(2, 6, 31);
    ds = gp::standardized(ds);
    const gp::GPModel model =
        gp::make_model(ds, shared_params(1.5, 1e-10), gp::KernelKind::SharedSek);
    const Eigen::VectorXd mu = gp::predict_mean(model, ds.design);
    for (Eigen::Index i = 0; i < ds.count(); ++i)
        CHECK(std::abs((mu[i] - ds.targets[i]) / ds.target_scale) <= 1e-6);

    // Single training point, unit kernel and noise: mean halves the target.
    gp::GPDataset scalar;
    scalar.design = Eigen::MatrixXd::Zero(1, 1);
    scalar.targets = Eigen::VectorXd::Constant(1, 2.0);
    const gp::GPModel m2 =
        gp::make_model(scalar, shared_params(1.0, 1.0), gp::KernelKind::SharedSek);
    CHECK(gp::predict_mean(m2, scalar.design)[0] ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("posterior matches the dense-inverse oracle") {
    const gp::GPDataset train = random_dataset(2, 3, 51);
    const gp::GPDataset query = random_dataset(2, 2, 52);
    const gp::GPModel model =
        gp::make_model(train, shared_params(0.9, 5e-2), gp::KernelKind::SharedSek);

    const Eigen::VectorXd mu = gp::predict_mean(model, query.design);
    const Eigen::VectorXd mu_oracle = dense_mean(model, query.design);
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        CHECK(std::abs(mu[i] - mu_oracle[i]) <=
              1e-8 * std::max(1.0, std::abs(mu_oracle[i])));

    const Eigen::MatrixXd cov = gp::predict_cov(model, query.design);
    const Eigen::MatrixXd cov_oracle = dense_cov(model, query.design);
    CHECK((cov - cov_oracle).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("posterior covariance limits") {
    gp::GPDataset ds = random_dataset(2, 5, 61);
    ds = gp::standardized(ds);
    const gp::GPModel model =
        gp::make_model(ds, shared_params(1.0, 1e-10), gp::KernelKind::SharedSek);

    // At a training point with floor noise the variance collapses.
    const Eigen::MatrixXd at_train = gp::predict_cov(model, ds.design.col(0));
    CHECK(at_train(0, 0) / (ds.target_scale * ds.target_scale) <= 1e-6);
    CHECK(at_train(0, 0) >= 0.0);

    // Far from the data the prior (unit amplitude) is recovered.
    Eigen::MatrixXd far(2, 1);
    far << 200.0, -150.0;
    const Eigen::MatrixXd prior = gp::predict_cov(model, far);
    CHECK(prior(0, 0) / (ds.target_scale * ds.target_scale) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oracle equivalence holds across random small models") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const gp::GPDataset train = random_dataset(3, 10, seed);
        const gp::GPDataset query = random_dataset(3, 4, seed + 1000);
        const gp::GPModel model = gp::make_model(
            gp::standardized(train), shared_params(1.2, 1e-2), gp::KernelKind::SharedSek);
        const Eigen::VectorXd mu = gp::predict_mean(model, query.design);
        const Eigen::VectorXd oracle = dense_mean(model, query.design);
        for (Eigen::Index i = 0; i < mu.size(); ++i)
            CHECK(std::abs(mu[i] - oracle[i]) <=
                  1e-8 * std::max(1.0, std::abs(oracle[i])));
    }
}
