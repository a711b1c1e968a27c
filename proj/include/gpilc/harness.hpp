#ifndef GPILC_HARNESS_HPP
#define GPILC_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gpilc/gp.hpp"
#include "gpilc/ilc.hpp"
#include "gpilc/plant.hpp"
#include "gpilc/signal_tools.hpp"

namespace gpilc::harness {

// Reference comes either from saved files (csv_path set) or is generated on
// the configured plant.
struct ReferenceSource {
    std::string csv_path;
    std::string json_path;
    std::uint64_t seed = 1;
    double cutoff_hz = 1.0;
    double input_variance = 1.0;
    Eigen::Index samples = 75;

    bool from_file() const { return !csv_path.empty(); }
};

struct CampaignConfig {
    std::string plant = "linear";
    std::string params_path;  // empty: checked-in defaults
    ilc::Variant variant = ilc::Variant::IO;
    int trials = 15;
    int history = 3;
    std::uint64_t master_seed = 1;
    ReferenceSource reference;

    bool auto_variance = true;     // probe for the input variance
    double input_variance = 1e-4;  // explicit value, or probe start value
    double power_threshold = 0.99;
    double excitation_factor = 3.0;
    int max_doublings = 12;

    // Unset: measured by replaying the realizing input (repeatability runs).
    std::optional<double> repetitive_floor;
    int repeatability_runs = 10;

    bool noise = true;
    bool early_stop = false;
    bool deterministic_timing = false;  // write wall_s as 0 for byte-stable logs
    int fit_starts = 5;
    int fit_max_iterations = 200;

    std::string out_dir;     // empty: in-memory only
    std::string task_label;  // free-form metadata for exports
};

nlohmann::json config_to_json(const CampaignConfig& config);
CampaignConfig config_from_json(const nlohmann::json& j);

struct TrialLog {
    int trial = 0;
    double error_norm = 0.0;
    double relative_raw = 0.0;
    double relative = 0.0;
    double wall_seconds = 0.0;
    double jacobian_norm = 0.0;
    std::vector<gp::KernelParams> hyperparameters;  // one entry (IO) or M (IS)
};

struct CampaignLog {
    std::vector<TrialLog> trials;
    double repetitive_floor = 0.0;
    double reference_norm = 0.0;
    Eigen::VectorXd final_input;  // input applied on the last executed trial
    nlohmann::json config_snapshot;
};

bool operator==(const TrialLog& a, const TrialLog& b);
bool operator==(const CampaignLog& a, const CampaignLog& b);

// Full learning campaign. Persists to config.out_dir when set; a trial that
// diverges persists the partial log before rethrowing.
CampaignLog run_learning(const CampaignConfig& config);

// Replays the reference's realizing input `runs` times with noise on and
// returns the maximum relative deviation. Per-run outputs are persisted under
// out_dir when given.
double run_repeatability(const plant::PlantSpec& spec, const sig::Reference& ref,
                         int runs, std::uint64_t seed,
                         const std::string& out_dir = "");

constexpr int kNotReached = -1;

// First trial whose relative error is reduced by `fraction` w.r.t. trial 1,
// or kNotReached.
int trials_to_fraction(const std::vector<TrialLog>& trials, double fraction);

struct ComparisonSummary {
    int io_to50 = kNotReached;
    int io_to80 = kNotReached;
    int is_to50 = kNotReached;
    int is_to80 = kNotReached;
    nlohmann::json details;
};

// Runs both variants on the same task (plant, reference, master seed must
// agree) and reports trials-to-50% / trials-to-80%.
ComparisonSummary compare_variants(const CampaignConfig& io_config,
                                   const CampaignConfig& is_config);

void persist_campaign(const CampaignLog& log, const std::string& dir);
CampaignLog load_campaign(const std::string& dir);

struct SuiteConfig {
    std::vector<std::string> plants = {"cube", "twipr", "pendu"};
    std::vector<ilc::Variant> variants = {ilc::Variant::IO, ilc::Variant::IS};
    int seeds = 5;
    int trials = 15;
    Eigen::Index samples = 75;
    std::string params_path;
    std::string out_dir;
};

// Task matrix: three generated references per plant (cutoffs 0.5/1/2 Hz with
// per-plant variances), shared across variants and master seeds; the
// repeatability floor is measured once per task.
nlohmann::json run_suite(const SuiteConfig& config);

// Scans a campaign directory (or a suite tree) and writes one tidy CSV with
// columns plant,task,variant,seed,j,err_norm,rel_raw,eps.
void export_plot_data(const std::string& in_dir, const std::string& out_csv);

}  // namespace gpilc::harness

#endif
