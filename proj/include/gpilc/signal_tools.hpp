#ifndef GPILC_SIGNAL_TOOLS_HPP
#define GPILC_SIGNAL_TOOLS_HPP

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace gpilc::plant {
struct PlantSpec;
}

namespace gpilc::sig {

struct Reference {
    Eigen::VectorXd r;
    double fs = 0.0;
    bool generated = false;
    std::uint64_t seed = 0;
    double cutoff_hz = 0.0;
    double input_variance = 0.0;
    std::string plant_id;
    std::string source_path;  // set when loaded from disk
    std::optional<Eigen::VectorXd> realizing_input;
};

struct ErrorMetrics {
    double error_norm = 0.0;       // ||e||_2
    double relative_raw = 0.0;     // ||e||_2 / ||r||_2
    double relative = 0.0;         // max(relative_raw - repetitive_floor, 0)
    double repetitive_floor = 0.0;
};

Eigen::VectorXd error_trajectory(const Eigen::VectorXd& r, const Eigen::VectorXd& y);

// Smallest frequency at which the cumulative one-sided periodogram power of
// the mean-removed signal reaches power_threshold of the total.
double significant_frequency(const Eigen::VectorXd& r, double fs,
                             double power_threshold = 0.99);

// Frequency-domain brickwall: bins strictly above the cutoff are zeroed.
Eigen::VectorXd zero_phase_lowpass(const Eigen::VectorXd& x, double cutoff_hz,
                                   double fs);

ErrorMetrics relative_error(const Eigen::VectorXd& e, const Eigen::VectorXd& r,
                            double repetitive_floor);

double max_repetitive_error(const std::vector<Eigen::VectorXd>& outputs,
                            const Eigen::VectorXd& r);

// Draws a seeded filtered input, runs one noise-free trial, and returns the
// output as a realizable reference with the realizing input attached.
Reference generate_reference(const plant::PlantSpec& spec, std::uint64_t seed,
                             double cutoff_hz, double input_variance, double fs,
                             Eigen::Index n);

// CSV (header n,r,u_realizing) plus a sidecar JSON with the generation
// metadata. Full-precision decimal round-trip.
void save_reference(const Reference& ref, const std::string& csv_path,
                    const std::string& json_path);
Reference load_reference(const std::string& csv_path, const std::string& json_path);

}  // namespace gpilc::sig

#endif
