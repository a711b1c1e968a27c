#include "gpilc/signal_tools.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <vector>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "gpilc/errors.hpp"
#include "gpilc/plant.hpp"
#include "gpilc/rng.hpp"

namespace gpilc::sig {

using nlohmann::json;

namespace {

// FFTW plan creation is not thread-safe; execution on distinct plans is.
std::mutex fftw_plan_mutex;

std::vector<std::complex<double>> rfft(const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.data(), x.data() + n);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        plan = fftw_plan_dft_r2c_1d(n, in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(plan);
    }
    return out;
}

Eigen::VectorXd irfft(std::vector<std::complex<double>> spectrum, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        plan = fftw_plan_dft_c2r_1d(n,
                                    reinterpret_cast<fftw_complex*>(spectrum.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(plan);
    }
    Eigen::VectorXd result(n);
    for (int i = 0; i < n; ++i) result[i] = out[static_cast<std::size_t>(i)] / n;
    return result;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Eigen::VectorXd error_trajectory(const Eigen::VectorXd& r, const Eigen::VectorXd& y) {
    if (r.size() != y.size())
        throw std::invalid_argument("error_trajectory: length mismatch");
    return r - y;
}

double significant_frequency(const Eigen::VectorXd& r, double fs,
                             double power_threshold) {
    if (!(power_threshold > 0.0 && power_threshold < 1.0))
        throw std::invalid_argument("significant_frequency: threshold must be in (0,1)");
    if (r.size() < 2)
        throw std::invalid_argument("significant_frequency: signal too short");
    const Eigen::VectorXd centered = r.array() - r.mean();
    if (centered.cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("significant_frequency: constant signal");

    const int n = static_cast<int>(r.size());
    const auto spectrum = rfft(centered);
    const int n_half = n / 2;
    // One-sided periodogram weights: interior bins count their conjugates.
    std::vector<double> power(static_cast<std::size_t>(n_half) + 1, 0.0);
    double total = 0.0;
    for (int i = 1; i <= n_half; ++i) {
        const double mag = std::norm(spectrum[static_cast<std::size_t>(i)]);
        const bool nyquist = (n % 2 == 0) && (i == n_half);
        power[static_cast<std::size_t>(i)] = nyquist ? mag : 2.0 * mag;
        total += power[static_cast<std::size_t>(i)];
    }
    if (total <= 0.0)
        throw std::invalid_argument("significant_frequency: zero spectral power");

    double cumulative = 0.0;
    for (int i = 1; i <= n_half; ++i) {
        cumulative += power[static_cast<std::size_t>(i)];
        if (cumulative >= power_threshold * total)
            return static_cast<double>(i) * fs / static_cast<double>(n);
    }
    return static_cast<double>(n_half) * fs / static_cast<double>(n);
}

Eigen::VectorXd zero_phase_lowpass(const Eigen::VectorXd& x, double cutoff_hz,
                                   double fs) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0))
        throw std::invalid_argument("zero_phase_lowpass: cutoff out of (0, fs/2)");
    const int n = static_cast<int>(x.size());
    auto spectrum = rfft(x);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double freq = static_cast<double>(i) * fs / static_cast<double>(n);
        if (freq > cutoff_hz) spectrum[i] = 0.0;
    }
    return irfft(std::move(spectrum), n);
}

ErrorMetrics relative_error(const Eigen::VectorXd& e, const Eigen::VectorXd& r,
                            double repetitive_floor) {
    if (repetitive_floor < 0.0)
        throw std::invalid_argument("relative_error: negative repetitive floor");
    const double r_norm = r.norm();
    if (!(r_norm > 0.0))
        throw std::invalid_argument("relative_error: zero reference");
    ErrorMetrics m;
    m.error_norm = e.norm();
    m.relative_raw = m.error_norm / r_norm;
    m.repetitive_floor = repetitive_floor;
    m.relative = std::max(m.relative_raw - repetitive_floor, 0.0);
    return m;
}

double max_repetitive_error(const std::vector<Eigen::VectorXd>& outputs,
                            const Eigen::VectorXd& r) {
    if (outputs.empty())
        throw std::invalid_argument("max_repetitive_error: no outputs");
    const double r_norm = r.norm();
    if (!(r_norm > 0.0))
        throw std::invalid_argument("max_repetitive_error: zero reference");
    double worst = 0.0;
    for (const Eigen::VectorXd& y : outputs) {
        if (y.size() != r.size())
            throw std::invalid_argument("max_repetitive_error: length mismatch");
        worst = std::max(worst, (r - y).norm() / r_norm);
    }
    return worst;
}

Reference generate_reference(const plant::PlantSpec& spec, std::uint64_t seed,
                             double cutoff_hz, double input_variance, double fs,
                             Eigen::Index n) {
    if (fs != spec.fs)
        throw std::invalid_argument("generate_reference: sample rate disagrees with plant");
    if (input_variance < 0.0)
        throw std::invalid_argument("generate_reference: negative input variance");
    rng::Rng draws(rng::derive(seed, "refgen"));
    Eigen::VectorXd u = draws.normal_vector(n, std::sqrt(input_variance));
    if (cutoff_hz < fs / 2.0) u = zero_phase_lowpass(u, cutoff_hz, fs);

    Reference ref;
    try {
        const plant::SimTrialResult trial = plant::run_trial(spec, u, seed, false);
        ref.r = trial.record.output;
    } catch (const DivergenceError& e) {
        throw GenerationFailedError(
            std::string("generate_reference: plant trial diverged (") + e.what() +
            "); retry with smaller variance or cutoff");
    }
    ref.fs = fs;
    ref.generated = true;
    ref.seed = seed;
    ref.cutoff_hz = cutoff_hz;
    ref.input_variance = input_variance;
    ref.plant_id = plant::to_string(spec.id);
    ref.realizing_input = std::move(u);
    return ref;
}

void save_reference(const Reference& ref, const std::string& csv_path,
                    const std::string& json_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw ConfigError("cannot write " + csv_path);
    csv << "n,r,u_realizing\n";
    for (Eigen::Index i = 0; i < ref.r.size(); ++i) {
        const double u = ref.realizing_input ? (*ref.realizing_input)[i] : 0.0;
        csv << (i + 1) << "," << format_double(ref.r[i]) << "," << format_double(u)
            << "\n";
    }
    json meta;
    meta["fs"] = ref.fs;
    meta["seed"] = ref.seed;
    meta["cutoff_hz"] = ref.cutoff_hz;
    meta["input_variance"] = ref.input_variance;
    meta["plant"] = ref.plant_id;
    meta["generated"] = ref.generated;
    std::ofstream js(json_path);
    if (!js) throw ConfigError("cannot write " + json_path);
    js << meta.dump(2) << "\n";
}

Reference load_reference(const std::string& csv_path, const std::string& json_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw NotFoundError("reference file not found: " + csv_path);
    std::string line;
    if (!std::getline(csv, line))
        throw ParseError(csv_path + ": empty file");
    if (line != "n,r,u_realizing")
        throw ParseError(csv_path + ": line 1: expected header n,r,u_realizing");
    std::vector<double> r_vals;
    std::vector<double> u_vals;
    int line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty()) continue;
        int idx = 0;
        double rv = 0.0, uv = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &idx, &rv, &uv) != 3)
            throw ParseError(csv_path + ": line " + std::to_string(line_no) +
                             ": expected 3 fields");
        if (idx != static_cast<int>(r_vals.size()) + 1)
            throw ParseError(csv_path + ": line " + std::to_string(line_no) +
                             ": sample index out of order");
        r_vals.push_back(rv);
        u_vals.push_back(uv);
    }
    if (r_vals.empty()) throw ParseError(csv_path + ": no samples");

    std::ifstream js(json_path);
    if (!js) throw NotFoundError("reference sidecar not found: " + json_path);
    json meta;
    try {
        meta = json::parse(js);
    } catch (const json::parse_error& e) {
        throw ParseError(json_path + ": " + e.what());
    }

    Reference ref;
    ref.r = Eigen::Map<Eigen::VectorXd>(r_vals.data(),
                                        static_cast<Eigen::Index>(r_vals.size()));
    ref.realizing_input = Eigen::Map<Eigen::VectorXd>(
        u_vals.data(), static_cast<Eigen::Index>(u_vals.size()));
    try {
        ref.fs = meta.at("fs").get<double>();
        ref.seed = meta.at("seed").get<std::uint64_t>();
        ref.cutoff_hz = meta.at("cutoff_hz").get<double>();
        ref.input_variance = meta.at("input_variance").get<double>();
        ref.plant_id = meta.at("plant").get<std::string>();
        ref.generated = meta.value("generated", false);
    } catch (const json::exception& e) {
        throw ParseError(json_path + ": missing field: " + e.what());
    }
    ref.source_path = csv_path;
    return ref;
}

}  // namespace gpilc::sig
