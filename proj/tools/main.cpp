#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gpilc/errors.hpp"
#include "gpilc/harness.hpp"
#include "gpilc/ilc.hpp"
#include "gpilc/plant.hpp"
#include "gpilc/rng.hpp"
#include "gpilc/signal_tools.hpp"

namespace {

using gpilc::harness::CampaignConfig;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitNumerical = 4;

int run(int argc, char** argv) {
    CLI::App app{"Plug-and-play trajectory learning for unknown dynamics: "
                 "GP models plus norm-optimal trial updates"};
    app.require_subcommand(1);

    std::string plant_name = "linear";
    std::string params_path;
    std::string out_dir = "out";
    std::string variant = "io";
    std::string config_path;
    std::string ref_base;
    std::uint64_t seed = 1;
    int trials = 15;
    int runs = 10;
    Eigen::Index samples = 75;
    double cutoff = 1.0;
    double variance = 1.0;

    auto* refgen = app.add_subcommand(
        "refgen", "Generate a realizable reference on a simulated plant");
    refgen->add_option("--plant", plant_name, "cube|twipr|pendu|linear");
    refgen->add_option("--params", params_path, "plant parameter file");
    refgen->add_option("--seed", seed, "generation seed");
    refgen->add_option("--cutoff", cutoff, "low-pass cutoff in Hz");
    refgen->add_option("--variance", variance, "input variance");
    refgen->add_option("--n", samples, "trajectory length in samples");
    refgen->add_option("--out", out_dir, "output directory");

    auto* repeat = app.add_subcommand(
        "repeat", "Measure the repeatability floor of a saved reference");
    repeat->add_option("--plant", plant_name, "cube|twipr|pendu|linear");
    repeat->add_option("--params", params_path, "plant parameter file");
    repeat->add_option("--ref", ref_base, "reference base path (without extension)")
        ->required();
    repeat->add_option("--runs", runs, "number of replays");
    repeat->add_option("--seed", seed, "noise seed");
    repeat->add_option("--out", out_dir, "output directory");

    auto* learn = app.add_subcommand("learn", "Run one learning campaign");
    learn->add_option("--config", config_path, "campaign config JSON");
    learn->add_option("--plant", plant_name, "cube|twipr|pendu|linear");
    learn->add_option("--params", params_path, "plant parameter file");
    learn->add_option("--variant", variant, "io|is");
    learn->add_option("--trials", trials, "number of trials");
    learn->add_option("--seed", seed, "master seed");
    learn->add_option("--ref", ref_base, "reference base path (without extension)");
    learn->add_option("--cutoff", cutoff, "generated reference cutoff in Hz");
    learn->add_option("--variance", variance, "generated reference input variance");
    learn->add_option("--n", samples, "generated reference length");
    learn->add_option("--out", out_dir, "campaign output directory");

    auto* compare = app.add_subcommand(
        "compare", "Run IO and IS campaigns on one task and compare");
    compare->add_option("--config", config_path, "campaign config JSON (variant ignored)");
    compare->add_option("--plant", plant_name, "cube|twipr|pendu|linear");
    compare->add_option("--params", params_path, "plant parameter file");
    compare->add_option("--trials", trials, "number of trials");
    compare->add_option("--seed", seed, "master seed");
    compare->add_option("--ref", ref_base, "reference base path (without extension)");
    compare->add_option("--cutoff", cutoff, "generated reference cutoff in Hz");
    compare->add_option("--variance", variance, "generated reference input variance");
    compare->add_option("--n", samples, "generated reference length");
    compare->add_option("--out", out_dir, "output directory");

    std::string plants_csv = "cube,twipr,pendu";
    std::string variants_csv = "io,is";
    int suite_seeds = 5;
    auto* suite = app.add_subcommand(
        "suite", "Run the 3x3 task matrix across variants and master seeds");
    suite->add_option("--plants", plants_csv, "comma-separated plant list");
    suite->add_option("--variants", variants_csv, "comma-separated variant list");
    suite->add_option("--seeds", suite_seeds, "number of master seeds");
    suite->add_option("--trials", trials, "trials per campaign");
    suite->add_option("--n", samples, "reference length");
    suite->add_option("--params", params_path, "plant parameter file");
    suite->add_option("--out", out_dir, "suite output directory")->required();

    std::string in_dir;
    std::string out_csv = "tidy.csv";
    auto* plotdata = app.add_subcommand(
        "plotdata", "Flatten campaign logs into one tidy CSV");
    plotdata->add_option("--in", in_dir, "campaign or suite directory")->required();
    plotdata->add_option("--out", out_csv, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const auto load_config = [&](gpilc::ilc::Variant fallback_variant) {
        CampaignConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in)
                throw gpilc::NotFoundError("config file not found: " + config_path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw gpilc::ParseError(config_path + ": " + e.what());
            }
            cfg = gpilc::harness::config_from_json(j);
        } else {
            cfg.plant = plant_name;
            cfg.params_path = params_path;
            cfg.variant = fallback_variant;
            cfg.trials = trials;
            cfg.master_seed = seed;
            if (!ref_base.empty()) {
                cfg.reference.csv_path = ref_base + ".csv";
                cfg.reference.json_path = ref_base + ".json";
            } else {
                cfg.reference.seed = gpilc::rng::derive(seed, "cli_ref");
                cfg.reference.cutoff_hz = cutoff;
                cfg.reference.input_variance = variance;
                cfg.reference.samples = samples;
            }
        }
        return cfg;
    };

    if (*refgen) {
        const gpilc::plant::PlantSpec spec =
            params_path.empty()
                ? gpilc::plant::default_plant(gpilc::plant::plant_id_from_string(plant_name))
                : gpilc::plant::load_plant(params_path,
                                           gpilc::plant::plant_id_from_string(plant_name));
        const gpilc::sig::Reference ref = gpilc::sig::generate_reference(
            spec, seed, cutoff, variance, spec.fs, samples);
        std::filesystem::create_directories(out_dir);
        gpilc::sig::save_reference(ref, out_dir + "/reference.csv",
                                   out_dir + "/reference.json");
        std::cout << "reference written to " << out_dir << " (norm "
                  << ref.r.norm() << ")\n";
        return kExitOk;
    }
    if (*repeat) {
        const gpilc::plant::PlantSpec spec =
            params_path.empty()
                ? gpilc::plant::default_plant(gpilc::plant::plant_id_from_string(plant_name))
                : gpilc::plant::load_plant(params_path,
                                           gpilc::plant::plant_id_from_string(plant_name));
        const gpilc::sig::Reference ref =
            gpilc::sig::load_reference(ref_base + ".csv", ref_base + ".json");
        const double floor =
            gpilc::harness::run_repeatability(spec, ref, runs, seed, out_dir);
        std::cout << "repetitive_floor " << floor << "\n";
        return kExitOk;
    }
    if (*learn) {
        CampaignConfig cfg = load_config(gpilc::ilc::variant_from_string(variant));
        if (config_path.empty()) cfg.out_dir = out_dir;
        if (cfg.out_dir.empty()) cfg.out_dir = out_dir;
        const gpilc::harness::CampaignLog log = gpilc::harness::run_learning(cfg);
        std::cout << "campaign finished: " << log.trials.size() << " trials, final eps "
                  << (log.trials.empty() ? 0.0 : log.trials.back().relative) << "\n";
        return kExitOk;
    }
    if (*compare) {
        CampaignConfig io_cfg = load_config(gpilc::ilc::Variant::IO);
        io_cfg.variant = gpilc::ilc::Variant::IO;
        CampaignConfig is_cfg = io_cfg;
        is_cfg.variant = gpilc::ilc::Variant::IS;
        if (io_cfg.out_dir.empty() && !out_dir.empty()) {
            io_cfg.out_dir = out_dir + "/io";
            is_cfg.out_dir = out_dir + "/is";
        } else if (!io_cfg.out_dir.empty()) {
            is_cfg.out_dir = io_cfg.out_dir + "_is";
            io_cfg.out_dir += "_io";
        }
        const gpilc::harness::ComparisonSummary s =
            gpilc::harness::compare_variants(io_cfg, is_cfg);
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir + "/compare.json");
        out << s.details.dump(2) << "\n";
        std::cout << s.details.dump(2) << "\n";
        return kExitOk;
    }
    if (*suite) {
        gpilc::harness::SuiteConfig cfg;
        cfg.plants.clear();
        for (auto&& part : CLI::detail::split(plants_csv, ','))
            cfg.plants.push_back(part);
        cfg.variants.clear();
        for (auto&& part : CLI::detail::split(variants_csv, ','))
            cfg.variants.push_back(gpilc::ilc::variant_from_string(part));
        cfg.seeds = suite_seeds;
        cfg.trials = trials;
        cfg.samples = samples;
        cfg.params_path = params_path;
        cfg.out_dir = out_dir;
        const json summary = gpilc::harness::run_suite(cfg);
        std::cout << summary.at("aggregates").dump(2) << "\n";
        return kExitOk;
    }
    if (*plotdata) {
        gpilc::harness::export_plot_data(in_dir, out_csv);
        std::cout << "tidy series written to " << out_csv << "\n";
        return kExitOk;
    }
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const gpilc::DivergenceError& e) {
        std::cerr << "plant divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const gpilc::GenerationFailedError& e) {
        std::cerr << "plant divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const gpilc::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const gpilc::ActuationIneffectiveError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const gpilc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gpilc::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gpilc::NotFoundError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
