#include "gpilc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <Eigen/SVD>

#include "gpilc/errors.hpp"
#include "gpilc/rng.hpp"

namespace gpilc::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json params_to_json(const gp::KernelParams& p) {
    json scales = json::array();
    for (Eigen::Index i = 0; i < p.length_scales.size(); ++i)
        scales.push_back(p.length_scales[i]);
    return {{"length_scales", std::move(scales)}, {"noise_variance", p.noise_variance}};
}

gp::KernelParams params_from_json(const json& j) {
    gp::KernelParams p;
    const auto& scales = j.at("length_scales");
    p.length_scales.resize(static_cast<Eigen::Index>(scales.size()));
    for (std::size_t i = 0; i < scales.size(); ++i)
        p.length_scales[static_cast<Eigen::Index>(i)] = scales.at(i).get<double>();
    p.noise_variance = j.at("noise_variance").get<double>();
    return p;
}

plant::PlantSpec resolve_plant(const CampaignConfig& config) {
    const plant::PlantId id = plant::plant_id_from_string(config.plant);
    return config.params_path.empty() ? plant::default_plant(id)
                                      : plant::load_plant(config.params_path, id);
}

sig::Reference resolve_reference(const CampaignConfig& config,
                                 const plant::PlantSpec& spec) {
    if (config.reference.from_file())
        return sig::load_reference(config.reference.csv_path,
                                   config.reference.json_path);
    return sig::generate_reference(spec, config.reference.seed,
                                   config.reference.cutoff_hz,
                                   config.reference.input_variance, spec.fs,
                                   config.reference.samples);
}

double spectral_norm(const Eigen::MatrixXd& m) {
    return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

void write_trials_csv(const CampaignLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "j,err_norm,rel_raw,eps,wall_s,P_norm\n";
    for (const TrialLog& t : log.trials) {
        out << t.trial << "," << format_double(t.error_norm) << ","
            << format_double(t.relative_raw) << "," << format_double(t.relative)
            << "," << format_double(t.wall_seconds) << ","
            << format_double(t.jacobian_norm) << "\n";
    }
}

std::vector<TrialLog> read_trials_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("trial series not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (line != "j,err_norm,rel_raw,eps,wall_s,P_norm")
        throw ParseError(path + ": line 1: unexpected header");
    std::vector<TrialLog> trials;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        TrialLog t;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &t.trial,
                        &t.error_norm, &t.relative_raw, &t.relative,
                        &t.wall_seconds, &t.jacobian_norm) != 6)
            throw ParseError(path + ": line " + std::to_string(line_no) +
                             ": expected 6 fields");
        trials.push_back(std::move(t));
    }
    return trials;
}

}  // namespace

json config_to_json(const CampaignConfig& c) {
    json j;
    j["plant"] = c.plant;
    j["params_path"] = c.params_path;
    j["variant"] = ilc::to_string(c.variant);
    j["trials"] = c.trials;
    j["history"] = c.history;
    j["master_seed"] = c.master_seed;
    json ref;
    if (c.reference.from_file()) {
        ref["csv"] = c.reference.csv_path;
        ref["json"] = c.reference.json_path;
    } else {
        ref["seed"] = c.reference.seed;
        ref["cutoff_hz"] = c.reference.cutoff_hz;
        ref["input_variance"] = c.reference.input_variance;
        ref["samples"] = c.reference.samples;
    }
    j["reference"] = std::move(ref);
    j["init"] = {{"auto", c.auto_variance},
                 {"variance", c.input_variance},
                 {"power_threshold", c.power_threshold},
                 {"excitation_factor", c.excitation_factor},
                 {"max_doublings", c.max_doublings}};
    if (c.repetitive_floor)
        j["repetitive_floor"] = *c.repetitive_floor;
    else
        j["repetitive_floor"] = nullptr;
    j["repeatability_runs"] = c.repeatability_runs;
    j["noise"] = c.noise;
    j["early_stop"] = c.early_stop;
    j["deterministic_timing"] = c.deterministic_timing;
    j["fit"] = {{"starts", c.fit_starts}, {"max_iterations", c.fit_max_iterations}};
    j["out_dir"] = c.out_dir;
    j["task_label"] = c.task_label;
    return j;
}

CampaignConfig config_from_json(const json& j) {
    CampaignConfig c;
    try {
        c.plant = j.value("plant", c.plant);
        c.params_path = j.value("params_path", c.params_path);
        c.variant = ilc::variant_from_string(j.value("variant", "io"));
        c.trials = j.value("trials", c.trials);
        c.history = j.value("history", c.history);
        c.master_seed = j.value("master_seed", c.master_seed);
        if (j.contains("reference")) {
            const json& ref = j.at("reference");
            if (ref.contains("csv")) {
                c.reference.csv_path = ref.at("csv").get<std::string>();
                c.reference.json_path = ref.value("json", "");
            } else {
                c.reference.seed = ref.value("seed", c.reference.seed);
                c.reference.cutoff_hz = ref.value("cutoff_hz", c.reference.cutoff_hz);
                c.reference.input_variance =
                    ref.value("input_variance", c.reference.input_variance);
                c.reference.samples = ref.value("samples", c.reference.samples);
            }
        }
        if (j.contains("init")) {
            const json& init = j.at("init");
            c.auto_variance = init.value("auto", c.auto_variance);
            c.input_variance = init.value("variance", c.input_variance);
            c.power_threshold = init.value("power_threshold", c.power_threshold);
            c.excitation_factor = init.value("excitation_factor", c.excitation_factor);
            c.max_doublings = init.value("max_doublings", c.max_doublings);
        }
        if (j.contains("repetitive_floor") && !j.at("repetitive_floor").is_null())
            c.repetitive_floor = j.at("repetitive_floor").get<double>();
        c.repeatability_runs = j.value("repeatability_runs", c.repeatability_runs);
        c.noise = j.value("noise", c.noise);
        c.early_stop = j.value("early_stop", c.early_stop);
        c.deterministic_timing = j.value("deterministic_timing", c.deterministic_timing);
        if (j.contains("fit")) {
            c.fit_starts = j.at("fit").value("starts", c.fit_starts);
            c.fit_max_iterations =
                j.at("fit").value("max_iterations", c.fit_max_iterations);
        }
        c.out_dir = j.value("out_dir", c.out_dir);
        c.task_label = j.value("task_label", c.task_label);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("campaign config: ") + e.what());
    }
    if (c.trials < 1) throw ConfigError("campaign config: trials must be >= 1");
    if (c.history < 1) throw ConfigError("campaign config: history must be >= 1");
    if (!(c.input_variance > 0.0))
        throw ConfigError("campaign config: input variance must be positive");
    return c;
}

bool operator==(const TrialLog& a, const TrialLog& b) {
    if (a.trial != b.trial || a.error_norm != b.error_norm ||
        a.relative_raw != b.relative_raw || a.relative != b.relative ||
        a.wall_seconds != b.wall_seconds || a.jacobian_norm != b.jacobian_norm)
        return false;
    if (a.hyperparameters.size() != b.hyperparameters.size()) return false;
    for (std::size_t i = 0; i < a.hyperparameters.size(); ++i) {
        if (a.hyperparameters[i].noise_variance != b.hyperparameters[i].noise_variance)
            return false;
        if (a.hyperparameters[i].length_scales != b.hyperparameters[i].length_scales)
            return false;
    }
    return true;
}

bool operator==(const CampaignLog& a, const CampaignLog& b) {
    return a.trials == b.trials && a.repetitive_floor == b.repetitive_floor &&
           a.reference_norm == b.reference_norm &&
           a.final_input == b.final_input && a.config_snapshot == b.config_snapshot;
}

double run_repeatability(const plant::PlantSpec& spec, const sig::Reference& ref,
                         int runs, std::uint64_t seed, const std::string& out_dir) {
    if (!ref.realizing_input)
        throw std::invalid_argument("run_repeatability: reference has no realizing input");
    if (runs < 1) throw std::invalid_argument("run_repeatability: runs must be >= 1");
    std::vector<Eigen::VectorXd> outputs;
    outputs.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < runs; ++i) {
        const plant::SimTrialResult trial = plant::run_trial(
            spec, *ref.realizing_input,
            rng::derive(seed, "repeat_run", static_cast<std::uint64_t>(i)), true);
        outputs.push_back(trial.record.output);
    }
    const double floor = sig::max_repetitive_error(outputs, ref.r);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(out_dir + "/repeatability.csv");
        if (!out) throw ConfigError("cannot write repeatability log");
        out << "run,n,y\n";
        for (int i = 0; i < runs; ++i)
            for (Eigen::Index k = 0; k < outputs[static_cast<std::size_t>(i)].size(); ++k)
                out << (i + 1) << "," << (k + 1) << ","
                    << format_double(outputs[static_cast<std::size_t>(i)][k]) << "\n";
        json meta;
        meta["repetitive_floor"] = floor;
        meta["runs"] = runs;
        std::ofstream js(out_dir + "/repeatability.json");
        js << meta.dump(2) << "\n";
    }
    return floor;
}

CampaignLog run_learning(const CampaignConfig& config) {
    const plant::PlantSpec spec = resolve_plant(config);
    if (config.variant == ilc::Variant::IS && spec.state_dim < 1)
        throw ConfigError("IS variant requires a plant with state output");
    const sig::Reference ref = resolve_reference(config, spec);
    if (ref.fs != spec.fs)
        throw ConfigError("reference sample rate disagrees with plant");
    const Eigen::VectorXd& r = ref.r;
    const Eigen::Index n = r.size();

    CampaignLog log;
    log.config_snapshot = config_to_json(config);
    log.reference_norm = r.norm();

    const std::uint64_t master = config.master_seed;
    double floor = 0.0;
    if (config.repetitive_floor) {
        floor = *config.repetitive_floor;
    } else if (ref.realizing_input) {
        floor = run_repeatability(spec, ref, config.repeatability_runs,
                                  rng::derive(master, "repeat"),
                                  config.out_dir.empty() ? ""
                                                         : config.out_dir + "/repeat");
    }
    log.repetitive_floor = floor;

    // Input variance: explicit, or probed until excitation clears the
    // measured noise floor.
    double input_variance = config.input_variance;
    if (config.auto_variance) {
        const plant::SimTrialResult quiet = plant::run_trial(
            spec, Eigen::VectorXd::Zero(n), rng::derive(master, "noise_floor"),
            config.noise);
        const Eigen::VectorXd& yq = quiet.record.output;
        const double noise_floor =
            std::sqrt((yq.array() - yq.mean()).square().mean());
        std::uint64_t probe_counter = 0;
        const ilc::TrialProbe probe = [&](const Eigen::VectorXd& u) {
            return plant::run_trial(spec, u,
                                    rng::derive(master, "probe_trial", probe_counter++),
                                    config.noise)
                .record.output;
        };
        ilc::InitConfig probe_cfg;
        probe_cfg.input_variance = config.input_variance;
        probe_cfg.power_threshold = config.power_threshold;
        probe_cfg.excitation_factor = config.excitation_factor;
        probe_cfg.max_doublings = config.max_doublings;
        probe_cfg.seed = rng::derive(master, "probe");
        input_variance =
            ilc::auto_input_variance(probe, noise_floor, probe_cfg, r, spec.fs);
    }

    ilc::InitConfig init_cfg;
    init_cfg.input_variance = input_variance;
    init_cfg.power_threshold = config.power_threshold;
    init_cfg.seed = rng::derive(master, "init");
    Eigen::VectorXd u = ilc::initial_input(r, init_cfg, spec.fs);

    std::vector<dyn::TrialRecord> records;
    std::optional<gp::KernelParams> warm_io;
    std::vector<gp::KernelParams> warm_is;
    const auto persist_partial = [&] {
        if (!config.out_dir.empty()) persist_campaign(log, config.out_dir);
    };

    for (int trial = 1; trial <= config.trials; ++trial) {
        const auto t_start = std::chrono::steady_clock::now();
        plant::SimTrialResult sim;
        try {
            sim = plant::run_trial(
                spec, u, rng::derive(master, "trial", static_cast<std::uint64_t>(trial)),
                config.noise);
        } catch (const DivergenceError&) {
            persist_partial();
            throw;
        }
        sim.record.index = trial;
        records.push_back(sim.record);
        log.final_input = u;

        const Eigen::VectorXd e = sig::error_trajectory(r, sim.record.output);
        const sig::ErrorMetrics metrics = sig::relative_error(e, r, floor);

        const std::vector<dyn::TrialRecord> window =
            dyn::truncate_history(records, config.history);

        gp::FitConfig fit_cfg;
        fit_cfg.starts = config.fit_starts;
        fit_cfg.max_iterations = config.fit_max_iterations;
        fit_cfg.seed = rng::derive(master, "fit", static_cast<std::uint64_t>(trial));

        TrialLog entry;
        entry.trial = trial;
        entry.error_norm = metrics.error_norm;
        entry.relative_raw = metrics.relative_raw;
        entry.relative = metrics.relative;

        dyn::LiftedJacobian jacobian;
        if (config.variant == ilc::Variant::IO) {
            fit_cfg.warm_start = warm_io;
            const dyn::IOModel model = dyn::fit_io_model(window, fit_cfg);
            jacobian = dyn::linearize_io(model, u);
            warm_io = model.gp.params;
            entry.hyperparameters = {model.gp.params};
        } else {
            const dyn::ISModel model = dyn::fit_is_model(
                window, spec.output_row, fit_cfg,
                warm_is.empty() ? nullptr : &warm_is);
            jacobian = dyn::linearize_is(model, u, *records.back().initial_state);
            warm_is.clear();
            for (const gp::GPModel& g : model.gps) {
                warm_is.push_back(g.params);
                entry.hyperparameters.push_back(g.params);
            }
        }
        entry.jacobian_norm = spectral_norm(jacobian.P);

        Eigen::VectorXd u_next;
        try {
            const ilc::WeightPair weights =
                ilc::compute_weights(jacobian, config.variant);
            const ilc::LearningGain gain = ilc::learning_gain(jacobian, weights);
            u_next = ilc::update_input(u, e, gain);
        } catch (const DegenerateModelError&) {
            // A flat model stalls the update law; re-excite instead.
            ilc::InitConfig fresh = init_cfg;
            fresh.seed = rng::derive(master, "fallback", static_cast<std::uint64_t>(trial));
            u_next = ilc::initial_input(r, fresh, spec.fs);
        }
        if (spec.input_bounds)
            u_next = u_next.cwiseMax(spec.input_bounds->first)
                         .cwiseMin(spec.input_bounds->second);

        const auto t_end = std::chrono::steady_clock::now();
        entry.wall_seconds =
            config.deterministic_timing
                ? 0.0
                : std::chrono::duration<double>(t_end - t_start).count();
        log.trials.push_back(std::move(entry));

        const std::size_t executed = log.trials.size();
        if (config.early_stop && executed >= 2 &&
            log.trials[executed - 1].relative == 0.0 &&
            log.trials[executed - 2].relative == 0.0)
            break;
        u = u_next;
    }

    persist_partial();
    return log;
}

int trials_to_fraction(const std::vector<TrialLog>& trials, double fraction) {
    if (trials.empty()) return kNotReached;
    const double baseline = trials.front().relative;
    if (baseline <= 0.0) return 1;
    const double target = baseline * (1.0 - fraction);
    for (const TrialLog& t : trials)
        if (t.relative <= target) return t.trial;
    return kNotReached;
}

ComparisonSummary compare_variants(const CampaignConfig& io_config,
                                   const CampaignConfig& is_config) {
    if (io_config.plant != is_config.plant ||
        io_config.master_seed != is_config.master_seed)
        throw ConfigError("compare_variants: configs must share plant and master seed");
    if (io_config.variant != ilc::Variant::IO || is_config.variant != ilc::Variant::IS)
        throw ConfigError("compare_variants: expected one IO and one IS config");

    const CampaignLog io_log = run_learning(io_config);
    const CampaignLog is_log = run_learning(is_config);

    ComparisonSummary s;
    s.io_to50 = trials_to_fraction(io_log.trials, 0.5);
    s.io_to80 = trials_to_fraction(io_log.trials, 0.8);
    s.is_to50 = trials_to_fraction(is_log.trials, 0.5);
    s.is_to80 = trials_to_fraction(is_log.trials, 0.8);
    const auto series = [](const CampaignLog& log) {
        json eps = json::array();
        for (const TrialLog& t : log.trials) eps.push_back(t.relative);
        return eps;
    };
    s.details = {{"io", {{"to50", s.io_to50}, {"to80", s.io_to80}, {"eps", series(io_log)}}},
                 {"is", {{"to50", s.is_to50}, {"to80", s.is_to80}, {"eps", series(is_log)}}}};
    return s;
}

void persist_campaign(const CampaignLog& log, const std::string& dir) {
    fs::create_directories(dir);
    write_trials_csv(log, dir + "/trials.csv");
    json j;
    j["config"] = log.config_snapshot;
    j["repetitive_floor"] = log.repetitive_floor;
    j["reference_norm"] = log.reference_norm;
    json final_input = json::array();
    for (Eigen::Index i = 0; i < log.final_input.size(); ++i)
        final_input.push_back(log.final_input[i]);
    j["final_input"] = std::move(final_input);
    json hyper = json::array();
    for (const TrialLog& t : log.trials) {
        json per_trial = json::array();
        for (const gp::KernelParams& p : t.hyperparameters)
            per_trial.push_back(params_to_json(p));
        hyper.push_back(std::move(per_trial));
    }
    j["hyperparameters"] = std::move(hyper);
    std::ofstream out(dir + "/summary.json");
    if (!out) throw ConfigError("cannot write campaign summary");
    out << j.dump(2) << "\n";
}

CampaignLog load_campaign(const std::string& dir) {
    if (!fs::exists(dir))
        throw NotFoundError("campaign directory not found: " + dir);
    const std::string summary_path = dir + "/summary.json";
    std::ifstream in(summary_path);
    if (!in) throw NotFoundError("campaign summary not found: " + summary_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(summary_path + ": " + e.what());
    }

    CampaignLog log;
    log.trials = read_trials_csv(dir + "/trials.csv");
    try {
        log.config_snapshot = j.at("config");
        log.repetitive_floor = j.at("repetitive_floor").get<double>();
        log.reference_norm = j.at("reference_norm").get<double>();
        const json& final_input = j.at("final_input");
        log.final_input.resize(static_cast<Eigen::Index>(final_input.size()));
        for (std::size_t i = 0; i < final_input.size(); ++i)
            log.final_input[static_cast<Eigen::Index>(i)] = final_input.at(i).get<double>();
        const json& hyper = j.at("hyperparameters");
        if (hyper.size() != log.trials.size())
            throw ParseError(summary_path + ": hyperparameter count disagrees with trials.csv");
        for (std::size_t t = 0; t < hyper.size(); ++t)
            for (const json& p : hyper.at(t))
                log.trials[t].hyperparameters.push_back(params_from_json(p));
    } catch (const json::exception& e) {
        throw ParseError(summary_path + ": missing field: " + e.what());
    }
    return log;
}

namespace {

double task_reference_variance(const std::string& plant, int task) {
    // Per-plant input variances paired with the 0.5/1/2 Hz cutoffs; chosen so
    // generated references stay in each testbed's mild nonlinear regime.
    if (plant == "cube") {
        const double v[3] = {4e-4, 1e-3, 4e-3};
        return v[task];
    }
    if (plant == "twipr") {
        const double v[3] = {2e-2, 5e-2, 1e-1};
        return v[task];
    }
    if (plant == "pendu") {
        const double v[3] = {1e-3, 4e-3, 1e-2};
        return v[task];
    }
    return 1.0;
}

}  // namespace

nlohmann::json run_suite(const SuiteConfig& config) {
    if (config.out_dir.empty()) throw ConfigError("suite requires an output directory");
    fs::create_directories(config.out_dir);
    const double cutoffs[3] = {0.5, 1.0, 2.0};

    json tasks = json::array();
    struct TaskRefs {
        std::string plant;
        int task;
        std::string csv, js;
        double floor;
    };
    std::vector<TaskRefs> task_refs;
    for (const std::string& plant_name : config.plants) {
        const plant::PlantSpec spec =
            config.params_path.empty()
                ? plant::default_plant(plant::plant_id_from_string(plant_name))
                : plant::load_plant(config.params_path,
                                    plant::plant_id_from_string(plant_name));
        for (int task = 0; task < 3; ++task) {
            const std::string task_dir = config.out_dir + "/tasks/" + plant_name +
                                         "_t" + std::to_string(task + 1);
            fs::create_directories(task_dir);
            const std::uint64_t task_seed =
                rng::derive(9001, plant_name, static_cast<std::uint64_t>(task));
            const sig::Reference ref = sig::generate_reference(
                spec, task_seed, cutoffs[task],
                task_reference_variance(plant_name, task), spec.fs, config.samples);
            const std::string csv = task_dir + "/reference.csv";
            const std::string js = task_dir + "/reference.json";
            sig::save_reference(ref, csv, js);
            const double floor = run_repeatability(
                spec, ref, 10, rng::derive(task_seed, "repeat"), task_dir);
            task_refs.push_back({plant_name, task, csv, js, floor});
            tasks.push_back({{"plant", plant_name},
                             {"task", task + 1},
                             {"cutoff_hz", cutoffs[task]},
                             {"repetitive_floor", floor},
                             {"reference_norm", ref.r.norm()}});
        }
    }

    json campaigns = json::array();
    std::map<std::string, std::vector<double>> to50_by_variant;
    std::map<std::string, std::vector<double>> to80_by_variant;
    for (const TaskRefs& task : task_refs) {
        for (const ilc::Variant variant : config.variants) {
            for (int seed = 1; seed <= config.seeds; ++seed) {
                CampaignConfig cfg;
                cfg.plant = task.plant;
                cfg.params_path = config.params_path;
                cfg.variant = variant;
                cfg.trials = config.trials;
                cfg.master_seed = static_cast<std::uint64_t>(seed);
                cfg.reference.csv_path = task.csv;
                cfg.reference.json_path = task.js;
                cfg.repetitive_floor = task.floor;
                cfg.task_label = task.plant + "_t" + std::to_string(task.task + 1);
                cfg.out_dir = config.out_dir + "/campaigns/" + cfg.task_label + "_" +
                              ilc::to_string(variant) + "_s" + std::to_string(seed);
                const CampaignLog log = run_learning(cfg);
                const int to50 = trials_to_fraction(log.trials, 0.5);
                const int to80 = trials_to_fraction(log.trials, 0.8);
                const double penalized50 =
                    (to50 == kNotReached) ? config.trials + 1 : to50;
                const double penalized80 =
                    (to80 == kNotReached) ? config.trials + 1 : to80;
                to50_by_variant[ilc::to_string(variant)].push_back(penalized50);
                to80_by_variant[ilc::to_string(variant)].push_back(penalized80);
                campaigns.push_back({{"plant", task.plant},
                                     {"task", task.task + 1},
                                     {"variant", ilc::to_string(variant)},
                                     {"seed", seed},
                                     {"to50", to50},
                                     {"to80", to80}});
            }
        }
    }

    const auto mean = [](const std::vector<double>& v) {
        double sum = 0.0;
        for (double x : v) sum += x;
        return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
    };
    const auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        return (v.size() % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    };

    json aggregates;
    for (const auto& [variant, values] : to50_by_variant) {
        aggregates[variant] = {{"to50_mean", mean(values)},
                               {"to50_median", median(values)},
                               {"to80_mean", mean(to80_by_variant.at(variant))},
                               {"to80_median", median(to80_by_variant.at(variant))}};
    }

    json summary;
    summary["tasks"] = std::move(tasks);
    summary["campaigns"] = std::move(campaigns);
    summary["aggregates"] = std::move(aggregates);
    std::ofstream out(config.out_dir + "/suite_summary.json");
    if (!out) throw ConfigError("cannot write suite summary");
    out << summary.dump(2) << "\n";
    export_plot_data(config.out_dir, config.out_dir + "/suite_tidy.csv");
    return summary;
}

void export_plot_data(const std::string& in_dir, const std::string& out_csv) {
    if (!fs::exists(in_dir))
        throw NotFoundError("plotdata input directory not found: " + in_dir);
    std::vector<fs::path> summaries;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir))
        if (entry.is_regular_file() && entry.path().filename() == "summary.json")
            summaries.push_back(entry.path());
    std::sort(summaries.begin(), summaries.end());

    std::ofstream out(out_csv);
    if (!out) throw ConfigError("cannot write " + out_csv);
    out << "plant,task,variant,seed,j,err_norm,rel_raw,eps\n";
    for (const fs::path& summary : summaries) {
        const CampaignLog log = load_campaign(summary.parent_path().string());
        const json& cfg = log.config_snapshot;
        const std::string plant_name = cfg.value("plant", "");
        const std::string task = cfg.value("task_label", "");
        const std::string variant = cfg.value("variant", "");
        const std::uint64_t seed = cfg.value("master_seed", std::uint64_t{0});
        for (const TrialLog& t : log.trials)
            out << plant_name << "," << task << "," << variant << "," << seed << ","
                << t.trial << "," << format_double(t.error_norm) << ","
                << format_double(t.relative_raw) << "," << format_double(t.relative)
                << "\n";
    }
}

}  // namespace gpilc::harness
