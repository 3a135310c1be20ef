#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "koop/datagen.hpp"
#include "koop/dictionary.hpp"
#include "koop/metrics.hpp"
#include "koop/nn_dictionary.hpp"
#include "koop/plant.hpp"

namespace koop {

/// One dictionary family to train: polynomial sweeps over degrees, RBF and NN
/// sweeps over lifted dimensions.
struct DictionarySpec {
    std::string kind;          // "polynomial", "rbf_<kernel>", or "nn"
    std::vector<int> degrees;  // polynomial only
    std::vector<int> n_lift;   // rbf / nn only, sorted ascending
    double eps = 1.0;          // rbf only
    NnHyperparams nn;          // nn only
};

struct ScenarioSpec {
    std::string cycle_path;
    double t_ac_in = 30.0;
    double omega_blw = 1.2;
    double t_ref_c = 23.0;
    PlantState x0{400.0, 1200.0, 35.0};
};

struct DataSpec {
    int n_train = 20;
    double train_duration_s = 2000.0;
    int n_test = 20;
    double test_duration_s = 1500.0;
    double hold_s = 60.0;
};

struct ExperimentConfig {
    std::filesystem::path config_dir;  // directory of the config file; relative paths resolve here
    std::string plant_params_path;
    PlantParams plant;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    DataSpec data;
    std::vector<DictionarySpec> dictionaries;
    bool correction = true;
    ControllerGains controller;
    std::vector<ScenarioSpec> scenarios;
    std::string cycle_model;  // model id used by the cycle command
    TuneGrid sweep;
    double rcond = 1e-10;

    std::filesystem::path resolve(const std::string& path) const;
    std::filesystem::path data_dir() const { return out_dir / "data"; }
    std::filesystem::path models_dir() const { return out_dir / "models"; }
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool paper_scale = false;  // restores the full 200-trajectory protocol
};

ExperimentConfig load_experiment_config(const std::string& path, const CliOverrides& ov = {});

/// Stable identifier for a trained model file: "<kind>_N<dim>".
std::string model_id(const std::string& kind, int n_lift);

// ---------------------------------------------------------------------------
// Pipeline commands. Each returns after writing its outputs under out_dir;
// failures are thrown (the CLI maps them to exit codes).
// ---------------------------------------------------------------------------

/// Simulates the training and test trajectory batches and writes one CSV per
/// trajectory plus manifest.json. Byte-identical when re-run with equal
/// config and seed.
void cmd_generate(const ExperimentConfig& cfg);

/// Fits one Koopman model per (dictionary kind, N) onto the training set and
/// writes models/<id>.json plus training_log.json (fit residuals and
/// consistency indices; wall times go to stdout only so outputs stay
/// deterministic).
void cmd_train(const ExperimentConfig& cfg);

/// Evaluates every configured model on the test trajectories: metrics.json,
/// rmse_vs_N.csv and per-model prediction traces of the first test
/// trajectory.
void cmd_evaluate(const ExperimentConfig& cfg);

/// Runs the baseline controller closed-loop on the plant over each scenario's
/// drive cycle, replays the recorded inputs open-loop through the chosen
/// model, and writes cycle_report.csv plus per-scenario traces.
/// model_override, when non-empty, is a path to a model JSON.
void cmd_cycle(const ExperimentConfig& cfg, const std::string& model_override = "");

/// Grid search over the configured RBF hyperparameters; writes tuning.csv and
/// tuning_best.json.
void cmd_sweep(const ExperimentConfig& cfg);

// helpers shared with tests
std::vector<Trajectory> load_trajectories(const ExperimentConfig& cfg, const std::string& role);
Trajectory run_closed_loop(const PlantParams& plant, const ControllerGains& gains,
                           const ScenarioSpec& scenario);

}  // namespace koop
