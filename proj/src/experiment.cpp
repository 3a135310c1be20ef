#include "koop/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "koop/edmd.hpp"
#include "koop/serialize.hpp"

namespace koop {

namespace fs = std::filesystem;

namespace {

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return splitmix64(sm);
}

double json_number(const Json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

}  // namespace

fs::path ExperimentConfig::resolve(const std::string& path) const {
    fs::path p(path);
    return p.is_absolute() ? p : config_dir / p;
}

std::string model_id(const std::string& kind, int n_lift) {
    return kind + "_N" + std::to_string(n_lift);
}

// ---------------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------------

ExperimentConfig load_experiment_config(const std::string& path, const CliOverrides& ov) {
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid experiment config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");

    ExperimentConfig cfg;
    cfg.config_dir = fs::path(path).parent_path();

    static const std::vector<std::string> known = {
        "plant_params", "seed",     "out_dir",     "data",  "dictionaries", "prediction",
        "controller",   "scenarios", "cycle_model", "sweep", "rcond"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown experiment config key '" + key + "'");
        }
    }

    if (!j.contains("plant_params")) throw ConfigError("config requires 'plant_params'");
    cfg.plant_params_path = j.at("plant_params").get<std::string>();
    cfg.plant = load_plant_params(cfg.resolve(cfg.plant_params_path).string());

    cfg.seed = j.value("seed", 0ULL);
    if (ov.seed) cfg.seed = *ov.seed;

    if (!j.contains("out_dir") && !ov.out_dir) throw ConfigError("config requires 'out_dir'");
    cfg.out_dir = ov.out_dir ? fs::path(*ov.out_dir) : cfg.resolve(j.at("out_dir").get<std::string>());

    if (j.contains("data")) {
        const Json& d = j.at("data");
        cfg.data.n_train = static_cast<int>(json_number(d, "n_train", cfg.data.n_train));
        cfg.data.train_duration_s = json_number(d, "train_duration_s", cfg.data.train_duration_s);
        cfg.data.n_test = static_cast<int>(json_number(d, "n_test", cfg.data.n_test));
        cfg.data.test_duration_s = json_number(d, "test_duration_s", cfg.data.test_duration_s);
        cfg.data.hold_s = json_number(d, "hold_s", cfg.data.hold_s);
    }
    if (ov.paper_scale) {
        cfg.data.n_train = 200;
        cfg.data.train_duration_s = 8500.0;
        cfg.data.n_test = 200;
        cfg.data.test_duration_s = 1500.0;
    }
    if (cfg.data.n_train < 1 || cfg.data.n_test < 1) {
        throw ConfigError("data requires at least one training and one test trajectory");
    }

    if (j.contains("dictionaries")) {
        for (const Json& dj : j.at("dictionaries")) {
            DictionarySpec spec;
            spec.kind = dj.at("kind").get<std::string>();
            if (spec.kind == "polynomial") {
                for (const Json& deg : dj.at("degrees")) spec.degrees.push_back(deg.get<int>());
                if (spec.degrees.empty()) throw ConfigError("polynomial spec requires degrees");
            } else if (spec.kind.rfind("rbf_", 0) == 0) {
                rbf_kind_from_name(spec.kind.substr(4));  // validates
                for (const Json& n : dj.at("n_lift")) spec.n_lift.push_back(n.get<int>());
                spec.eps = json_number(dj, "eps", 1.0);
            } else if (spec.kind == "nn") {
                for (const Json& n : dj.at("n_lift")) spec.n_lift.push_back(n.get<int>());
                if (dj.contains("nn")) {
                    const Json& h = dj.at("nn");
                    spec.nn.learning_rate = json_number(h, "learning_rate", spec.nn.learning_rate);
                    spec.nn.tolerance = json_number(h, "tolerance", spec.nn.tolerance);
                    spec.nn.epochs = static_cast<int>(json_number(h, "epochs", spec.nn.epochs));
                    spec.nn.minibatch = static_cast<int>(json_number(h, "minibatch", spec.nn.minibatch));
                    spec.nn.ridge = json_number(h, "ridge", spec.nn.ridge);
                }
            } else {
                throw ConfigError("unknown dictionary kind '" + spec.kind + "'");
            }
            if (!std::is_sorted(spec.n_lift.begin(), spec.n_lift.end()) ||
                !std::is_sorted(spec.degrees.begin(), spec.degrees.end())) {
                throw ConfigError("dictionary N list must be sorted ascending");
            }
            cfg.dictionaries.push_back(std::move(spec));
        }
    }

    if (j.contains("prediction")) {
        cfg.correction = j.at("prediction").value("correction", true);
    }
    if (j.contains("controller")) {
        const Json& c = j.at("controller");
        cfg.controller.kp = json_number(c, "kp", cfg.controller.kp);
        cfg.controller.ki = json_number(c, "ki", cfg.controller.ki);
        cfg.controller.bias_hz = json_number(c, "bias_hz", cfg.controller.bias_hz);
    }
    if (j.contains("scenarios")) {
        for (const Json& sj : j.at("scenarios")) {
            ScenarioSpec s;
            s.cycle_path = sj.at("cycle").get<std::string>();
            if (!fs::exists(cfg.resolve(s.cycle_path))) {
                throw ConfigError("scenario cycle file does not exist: " + s.cycle_path);
            }
            s.t_ac_in = json_number(sj, "t_ac_in", s.t_ac_in);
            s.omega_blw = json_number(sj, "omega_blw", s.omega_blw);
            s.t_ref_c = json_number(sj, "t_ref_c", s.t_ref_c);
            if (sj.contains("x0")) {
                const Json& x = sj.at("x0");
                s.x0 = {x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>()};
            }
            cfg.scenarios.push_back(std::move(s));
        }
    }
    if (j.contains("cycle_model")) cfg.cycle_model = j.at("cycle_model").get<std::string>();
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        for (const Json& k : s.at("kinds")) cfg.sweep.kinds.push_back(rbf_kind_from_name(k.get<std::string>()));
        for (const Json& n : s.at("n_lift")) cfg.sweep.n_values.push_back(n.get<int>());
        for (const Json& e : s.at("eps")) cfg.sweep.eps_values.push_back(e.get<double>());
    }
    cfg.rcond = json_number(j, "rcond", cfg.rcond);
    return cfg;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

namespace {

PlantState sample_initial_condition(const SanityEnvelope& env, RngStream& rng) {
    // uniform over the interior 60% of the sanity envelope
    auto interior = [&rng](double lo, double hi) {
        const double margin = 0.2 * (hi - lo);
        return rng.uniform(lo + margin, hi - margin);
    };
    return {interior(env.p_e_min, env.p_e_max), interior(env.p_c_min, env.p_c_max),
            interior(env.t_cabin_min, env.t_cabin_max)};
}

struct TrajectoryPlan {
    std::string file;
    std::string role;
    double duration_s;
    std::uint64_t excitation_seed;
    PlantState x0;
};

std::vector<TrajectoryPlan> make_plan(const ExperimentConfig& cfg) {
    std::vector<TrajectoryPlan> plan;
    char name[64];
    const int total = cfg.data.n_train + cfg.data.n_test;
    for (int i = 0; i < total; ++i) {
        const bool train = i < cfg.data.n_train;
        TrajectoryPlan p;
        std::snprintf(name, sizeof(name), "%s_%03d.csv", train ? "train" : "test",
                      train ? i : i - cfg.data.n_train);
        p.file = name;
        p.role = train ? "train" : "test";
        p.duration_s = train ? cfg.data.train_duration_s : cfg.data.test_duration_s;
        p.excitation_seed = derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(i));
        RngStream ic_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(i) + 1));
        p.x0 = sample_initial_condition(cfg.plant.envelope, ic_rng);
        plan.push_back(std::move(p));
    }
    return plan;
}

}  // namespace

void cmd_generate(const ExperimentConfig& cfg) {
    const auto plan = make_plan(cfg);
    fs::create_directories(cfg.data_dir());

    std::vector<Trajectory> trajectories(plan.size());
    parallel_for(static_cast<int>(plan.size()), [&](int i) {
        const TrajectoryPlan& p = plan[i];
        ExcitationSpec spec;
        spec.hold_s = cfg.data.hold_s;
        spec.duration_s = p.duration_s;
        spec.rng_seed = p.excitation_seed;
        try {
            trajectories[i] = simulate_trajectory(p.x0, generate_excitation(spec), cfg.plant);
        } catch (const TrajectoryDiverged& e) {
            throw NumericError("trajectory " + std::to_string(i) + " (" + p.file +
                               ") diverged: " + e.what());
        }
    });

    for (std::size_t i = 0; i < plan.size(); ++i) {
        write_trajectory_csv((cfg.data_dir() / plan[i].file).string(), trajectories[i]);
    }

    Json manifest;
    manifest["format"] = "koopman-dataset-v1";
    manifest["seed"] = cfg.seed;
    manifest["dt_s"] = 1.0;
    manifest["hold_s"] = cfg.data.hold_s;
    manifest["plant_params"] = cfg.plant_params_path;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                  static_cast<unsigned long long>(fnv1a(plant_params_to_json_text(cfg.plant))));
    manifest["plant_params_fnv1a"] = hash_hex;
    Json list = Json::array();
    for (const auto& p : plan) {
        Json t;
        t["file"] = p.file;
        t["role"] = p.role;
        t["duration_s"] = p.duration_s;
        t["excitation_seed"] = p.excitation_seed;
        t["x0"] = Json::array({p.x0.p_e, p.x0.p_c, p.x0.t_cabin});
        list.push_back(t);
    }
    manifest["trajectories"] = list;
    write_text_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::vector<Trajectory> load_trajectories(const ExperimentConfig& cfg, const std::string& role) {
    const fs::path manifest_path = cfg.out_dir / "manifest.json";
    Json manifest;
    try {
        manifest = Json::parse(read_text_file(manifest_path));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("invalid manifest JSON: ") + e.what(), 0);
    }
    std::vector<Trajectory> out;
    for (const Json& t : manifest.at("trajectories")) {
        if (t.at("role").get<std::string>() != role) continue;
        out.push_back(read_trajectory_csv((cfg.data_dir() / t.at("file").get<std::string>()).string()));
    }
    if (out.empty()) throw ConfigError("manifest lists no '" + role + "' trajectories");
    return out;
}

namespace {

struct TrainedEntry {
    std::string id;
    std::string kind;
    int n_lift;
    double eps = 0.0;
    KoopmanModel model;
    double residual_fro = 0.0;
    double residual_rel = 0.0;
    double ci = 0.0;
    std::vector<double> nn_loss_history;
};

double fit_residual(const KoopmanModel& model, const SnapshotDataset& ds, double* rel) {
    const Eigen::MatrixXd z = model.dictionary->lift_batch(ds.X);
    const Eigen::MatrixXd zp = model.dictionary->lift_batch(ds.Xp);
    const Eigen::MatrixXd r = zp - model.A * z - model.B * ds.U - model.D * ds.W;
    const double fro = r.norm();
    if (rel) *rel = zp.norm() > 0.0 ? fro / zp.norm() : 0.0;
    return fro;
}

std::vector<TrainedEntry> train_all(const ExperimentConfig& cfg, const SnapshotDataset& train_ds) {
    std::vector<TrainedEntry> entries;
    std::uint64_t dict_index = 0;
    for (const DictionarySpec& spec : cfg.dictionaries) {
        if (spec.kind == "polynomial") {
            for (int degree : spec.degrees) {
                TrainedEntry e;
                e.kind = spec.kind;
                e.n_lift = polynomial_dim(degree);
                e.id = model_id(spec.kind, e.n_lift);
                const auto t0 = std::chrono::steady_clock::now();
                auto dict = std::make_shared<PolynomialDictionary>(degree);
                e.model = fit_koopman(train_ds, dict, cfg.rcond);
                e.ci = consistency_index(train_ds, dict, cfg.rcond);
                e.residual_fro = fit_residual(e.model, train_ds, &e.residual_rel);
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                std::cout << "trained " << e.id << " in " << dt.count() << " s\n";
                entries.push_back(std::move(e));
            }
        } else if (spec.kind.rfind("rbf_", 0) == 0) {
            const RbfKind kind = rbf_kind_from_name(spec.kind.substr(4));
            for (int n : spec.n_lift) {
                TrainedEntry e;
                e.kind = spec.kind;
                e.n_lift = n;
                e.eps = spec.eps;
                e.id = model_id(spec.kind, n);
                const auto t0 = std::chrono::steady_clock::now();
                auto dict = build_rbf_dictionary(train_ds, n, kind, spec.eps,
                                                 derive_seed(cfg.seed, 0x5bf0 + dict_index));
                e.model = fit_koopman(train_ds, dict, cfg.rcond);
                e.ci = consistency_index(train_ds, dict, cfg.rcond);
                e.residual_fro = fit_residual(e.model, train_ds, &e.residual_rel);
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                std::cout << "trained " << e.id << " in " << dt.count() << " s\n";
                entries.push_back(std::move(e));
            }
        } else if (spec.kind == "nn") {
            for (int n : spec.n_lift) {
                TrainedEntry e;
                e.kind = spec.kind;
                e.n_lift = n;
                e.id = model_id(spec.kind, n);
                const auto t0 = std::chrono::steady_clock::now();
                NnTrainResult res = train_nn_dictionary(train_ds, n, spec.nn,
                                                        derive_seed(cfg.seed, 0x44f1 + dict_index));
                e.nn_loss_history = res.loss_history;
                e.model = fit_koopman(train_ds, res.dictionary, cfg.rcond);
                e.ci = consistency_index(train_ds, res.dictionary, cfg.rcond);
                e.residual_fro = fit_residual(e.model, train_ds, &e.residual_rel);
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                std::cout << "trained " << e.id << " in " << dt.count() << " s\n";
                entries.push_back(std::move(e));
            }
        }
        ++dict_index;
    }
    return entries;
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg) {
    if (cfg.dictionaries.empty()) throw ConfigError("config lists no dictionaries to train");
    const SnapshotDataset train_ds = assemble_snapshots(load_trajectories(cfg, "train"));
    const auto entries = train_all(cfg, train_ds);

    fs::create_directories(cfg.models_dir());
    Json log;
    log["format"] = "koopman-training-log-v1";
    Json models = Json::array();
    for (const auto& e : entries) {
        save_model((cfg.models_dir() / (e.id + ".json")).string(), e.model);
        Json m;
        m["id"] = e.id;
        m["kind"] = e.kind;
        m["n_lift"] = e.n_lift;
        if (e.kind.rfind("rbf_", 0) == 0) m["eps"] = e.eps;
        m["fit_residual_fro"] = e.residual_fro;
        m["fit_residual_rel"] = e.residual_rel;
        m["consistency_index"] = e.ci;
        if (!e.nn_loss_history.empty()) m["nn_loss_history"] = e.nn_loss_history;
        models.push_back(m);
    }
    log["models"] = models;
    write_text_file(cfg.out_dir / "training_log.json", log.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, double>> configured_model_ids(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, double>> ids;  // id, eps
    for (const DictionarySpec& spec : cfg.dictionaries) {
        if (spec.kind == "polynomial") {
            for (int degree : spec.degrees) ids.emplace_back(model_id(spec.kind, polynomial_dim(degree)), 0.0);
        } else {
            for (int n : spec.n_lift) {
                ids.emplace_back(model_id(spec.kind, n), spec.kind.rfind("rbf_", 0) == 0 ? spec.eps : 0.0);
            }
        }
    }
    return ids;
}

void write_trace_csv(const fs::path& path, const Eigen::MatrixXd& truth_states,
                     const Eigen::MatrixXd& pred_states, const Eigen::VectorXd& truth_power,
                     const Eigen::VectorXd& pred_power) {
    // rows cover the window where both truth and prediction exist
    const Eigen::Index n = truth_power.size();
    std::ostringstream out;
    out << "t_s,p_e_true,p_e_pred,p_c_true,p_c_pred,t_cab_true,t_cab_pred,power_true,power_pred\n";
    for (Eigen::Index k = 0; k < n; ++k) {
        out << k << ',' << format_double(truth_states(0, k)) << ',' << format_double(pred_states(0, k))
            << ',' << format_double(truth_states(1, k)) << ',' << format_double(pred_states(1, k))
            << ',' << format_double(truth_states(2, k)) << ',' << format_double(pred_states(2, k))
            << ',' << format_double(truth_power[k]) << ',' << format_double(pred_power[k]) << "\n";
    }
    write_text_file(path, out.str());
}

}  // namespace

void cmd_evaluate(const ExperimentConfig& cfg) {
    const std::vector<Trajectory> test = load_trajectories(cfg, "test");
    const SnapshotDataset train_ds = assemble_snapshots(load_trajectories(cfg, "train"));
    const auto ids = configured_model_ids(cfg);
    if (ids.empty()) throw ConfigError("config lists no models to evaluate");

    PredictOptions opt;
    opt.correction = cfg.correction;

    Json metrics = Json::array();
    std::ostringstream csv;
    csv << "dict_kind,N,eps,rmse_pe,rmse_pc,rmse_tcab,pct_power,energy_err_pct,ci\n";

    for (const auto& [id, eps] : ids) {
        const KoopmanModel model = load_model((cfg.models_dir() / (id + ".json")).string());
        MetricsReport report = evaluate_model(model, test, opt);
        report.eps = eps;
        report.ci = consistency_index(train_ds, model.dictionary, cfg.rcond);

        Json m;
        m["id"] = id;
        m["dict_kind"] = report.dict_kind;
        m["n_lift"] = report.n_lift;
        m["eps"] = eps;
        m["n_sim"] = report.n_sim;
        m["diverged"] = report.diverged;
        m["rmse_avg"] = Json::array({report.rmse_avg_states[0], report.rmse_avg_states[1],
                                     report.rmse_avg_states[2]});
        m["pct_rmse"] = Json::array({report.pct_rmse_states[0], report.pct_rmse_states[1],
                                     report.pct_rmse_states[2]});
        m["pct_rmse_power"] = report.pct_rmse_power;
        m["energy_error_pct"] = report.energy_error;
        m["consistency_index"] = report.ci;
        metrics.push_back(m);

        csv << report.dict_kind << ',' << report.n_lift << ',' << format_double(eps) << ','
            << format_double(report.rmse_avg_states[0]) << ','
            << format_double(report.rmse_avg_states[1]) << ','
            << format_double(report.rmse_avg_states[2]) << ','
            << format_double(report.pct_rmse_power) << ',' << format_double(report.energy_error)
            << ',' << format_double(report.ci) << "\n";

        // prediction trace of the first test trajectory (figure analogue)
        const Trajectory& probe = test.front();
        Eigen::MatrixXd u(2, probe.transitions()), w(3, probe.transitions());
        for (int k = 0; k < probe.transitions(); ++k) {
            u(0, k) = probe.inputs[k].mdot_fan;
            u(1, k) = probe.inputs[k].omega_cmp;
            w(0, k) = probe.disturbances[k].t_ac_in;
            w(1, k) = probe.disturbances[k].v_veh;
            w(2, k) = probe.disturbances[k].omega_blw;
        }
        try {
            const PredictionResult pred = predict(model, probe.states.front(), u, w, opt);
            Eigen::MatrixXd truth(3, probe.states.size());
            for (std::size_t k = 0; k < probe.states.size(); ++k) truth.col(k) = probe.states[k].vec();
            Eigen::VectorXd p_true(probe.outputs.size()), p_pred(probe.outputs.size());
            for (std::size_t k = 0; k < probe.outputs.size(); ++k) {
                p_true[k] = probe.outputs[k].p_cmp + probe.outputs[k].p_fan;
                p_pred[k] = model.n_outputs() == 2 ? pred.outputs.col(k).sum() : 0.0;
            }
            write_trace_csv(cfg.out_dir / ("trace_" + id + "_traj000.csv"), truth, pred.states,
                            p_true, p_pred);
        } catch (const TrajectoryDiverged&) {
            // diverged trace: already counted in the report; no trace emitted
        }
    }

    write_text_file(cfg.out_dir / "metrics.json", metrics.dump(2) + "\n");
    write_text_file(cfg.out_dir / "rmse_vs_N.csv", csv.str());
}

// ---------------------------------------------------------------------------
// cycle
// ---------------------------------------------------------------------------

Trajectory run_closed_loop(const PlantParams& plant, const ControllerGains& gains,
                           const ScenarioSpec& scenario) {
    const std::vector<Disturbance> disturbances =
        load_drive_cycle(scenario.cycle_path, scenario.t_ac_in, scenario.omega_blw);
    if (disturbances.size() < 2) throw ConfigError("drive cycle must span at least 2 samples");

    Trajectory traj;
    traj.states.push_back(scenario.x0);
    ControlBounds bounds;
    double integral = 0.0;
    // one control update per 1 s sample; the last disturbance sample has no
    // successor state, so it only shapes the final transition count
    for (std::size_t k = 0; k + 1 < disturbances.size(); ++k) {
        const ControllerStep step =
            baseline_controller(traj.states.back(), scenario.t_ref_c, gains, bounds, integral, 1.0);
        integral = step.integral;
        traj.inputs.push_back(step.u);
        traj.disturbances.push_back(disturbances[k]);
        traj.outputs.push_back(plant_outputs(traj.states.back(), step.u, plant));
        try {
            traj.states.push_back(step_plant(traj.states.back(), step.u, disturbances[k], 1.0, plant));
        } catch (const TrajectoryDiverged&) {
            throw TrajectoryDiverged("closed-loop plant run left the envelope",
                                     static_cast<int>(k));
        }
    }
    return traj;
}

void cmd_cycle(const ExperimentConfig& cfg, const std::string& model_override) {
    if (cfg.scenarios.empty()) throw ConfigError("config lists no scenarios");
    std::string model_path;
    if (!model_override.empty()) {
        model_path = model_override;
    } else {
        if (cfg.cycle_model.empty()) throw ConfigError("config has no 'cycle_model' and no --model given");
        model_path = (cfg.models_dir() / (cfg.cycle_model + ".json")).string();
    }
    const KoopmanModel model = load_model(model_path);
    PredictOptions opt;
    opt.correction = cfg.correction;

    std::ostringstream csv;
    csv << "cycle,t_ac_in,omega_blw,t_ref,model,pct_rmse_pc,pct_rmse_pe,pct_rmse_tcab,"
           "pct_rmse_power,energy_err_pct\n";

    int scenario_index = 0;
    for (const ScenarioSpec& raw : cfg.scenarios) {
        ScenarioSpec scenario = raw;
        scenario.cycle_path = cfg.resolve(raw.cycle_path).string();
        const Trajectory truth = run_closed_loop(cfg.plant, cfg.controller, scenario);

        Eigen::MatrixXd u(2, truth.transitions()), w(3, truth.transitions());
        for (int k = 0; k < truth.transitions(); ++k) {
            u(0, k) = truth.inputs[k].mdot_fan;
            u(1, k) = truth.inputs[k].omega_cmp;
            w(0, k) = truth.disturbances[k].t_ac_in;
            w(1, k) = truth.disturbances[k].v_veh;
            w(2, k) = truth.disturbances[k].omega_blw;
        }
        // open-loop replay of the recorded closed-loop inputs (no controller
        // runs inside the Koopman rollout)
        const PredictionResult pred = predict(model, truth.states.front(), u, w, opt);

        Eigen::MatrixXd truth_states(3, truth.states.size());
        for (std::size_t k = 0; k < truth.states.size(); ++k) truth_states.col(k) = truth.states[k].vec();
        Eigen::MatrixXd truth_outputs(2, truth.outputs.size());
        for (std::size_t k = 0; k < truth.outputs.size(); ++k) {
            truth_outputs(0, k) = truth.outputs[k].p_cmp;
            truth_outputs(1, k) = truth.outputs[k].p_fan;
        }
        const Eigen::MatrixXd pred_outputs = pred.outputs.leftCols(truth_outputs.cols());
        const Eigen::VectorXd power_true = truth_outputs.colwise().sum().transpose();
        const Eigen::VectorXd power_pred = pred_outputs.colwise().sum().transpose();

        const std::string cycle_name = fs::path(raw.cycle_path).stem().string();
        csv << cycle_name << ',' << format_double(scenario.t_ac_in) << ','
            << format_double(scenario.omega_blw) << ',' << format_double(scenario.t_ref_c) << ','
            << fs::path(model_path).stem().string() << ','
            << format_double(pct_rmse(pred.states.row(1).transpose(), truth_states.row(1).transpose())) << ','
            << format_double(pct_rmse(pred.states.row(0).transpose(), truth_states.row(0).transpose())) << ','
            << format_double(pct_rmse(pred.states.row(2).transpose(), truth_states.row(2).transpose())) << ','
            << format_double(pct_rmse(power_pred, power_true)) << ','
            << format_double(energy_error_pct(pred_outputs, truth_outputs, truth.dt)) << "\n";

        char trace_name[64];
        std::snprintf(trace_name, sizeof(trace_name), "cycle_trace_%02d.csv", scenario_index);
        write_trace_csv(cfg.out_dir / trace_name, truth_states, pred.states, power_true, power_pred);
        ++scenario_index;
    }
    write_text_file(cfg.out_dir / "cycle_report.csv", csv.str());
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

void cmd_sweep(const ExperimentConfig& cfg) {
    cfg.sweep.validate();
    const SnapshotDataset train_ds = assemble_snapshots(load_trajectories(cfg, "train"));
    const std::vector<Trajectory> test = load_trajectories(cfg, "test");

    const GridSearchResult result =
        grid_search(train_ds, test, cfg.sweep, derive_seed(cfg.seed, 0x971d), cfg.rcond);

    std::ostringstream csv;
    csv << "dict_kind,N,eps,score,status\n";
    for (const GridPoint& pt : result.table) {
        csv << "rbf_" << rbf_kind_name(pt.kind) << ',' << pt.n_lift << ',' << format_double(pt.eps)
            << ',' << (pt.failed ? "" : format_double(pt.score)) << ','
            << (pt.failed ? "failed" : "ok") << "\n";
    }
    write_text_file(cfg.out_dir / "tuning.csv", csv.str());

    Json best;
    best["kind"] = "rbf_" + rbf_kind_name(result.best.kind);
    best["n_lift"] = result.best.n_lift;
    best["eps"] = result.best.eps;
    best["score"] = result.best.score;
    write_text_file(cfg.out_dir / "tuning_best.json", best.dump(2) + "\n");
}

}  // namespace koop
