#include "koop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace koop {

Eigen::VectorXd rmse_avg(const std::vector<Eigen::MatrixXd>& predictions,
                         const std::vector<Eigen::MatrixXd>& truths) {
    if (predictions.size() != truths.size() || predictions.empty()) {
        throw ConfigError("rmse_avg requires matching, non-empty series lists");
    }
    const Eigen::Index rows = predictions.front().rows();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows);
    for (std::size_t j = 0; j < predictions.size(); ++j) {
        const Eigen::MatrixXd& p = predictions[j];
        const Eigen::MatrixXd& t = truths[j];
        if (p.rows() != rows || t.rows() != rows || p.cols() != t.cols() || p.cols() == 0) {
            throw ConfigError("rmse_avg: series shape mismatch at index " + std::to_string(j));
        }
        const Eigen::ArrayXXd err = (p - t).array().square();
        acc += (err.rowwise().mean()).sqrt().matrix();
    }
    return acc / static_cast<double>(predictions.size());
}

double pct_rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth) {
    if (prediction.size() != truth.size() || truth.size() == 0) {
        throw ConfigError("pct_rmse requires equal-length, non-empty series");
    }
    const double range = truth.maxCoeff() - truth.minCoeff();
    if (!(range > 0.0)) throw NumericError("pct_rmse: constant truth series, normalization undefined");
    const double rmse = std::sqrt((prediction - truth).squaredNorm() / truth.size());
    return 100.0 * rmse / range;
}

double energy_error_pct(const Eigen::MatrixXd& predicted_outputs,
                        const Eigen::MatrixXd& true_outputs, double dt) {
    if (predicted_outputs.cols() != true_outputs.cols() || true_outputs.cols() == 0) {
        throw ConfigError("energy_error_pct requires equal-length, non-empty series");
    }
    const double pred_energy = predicted_outputs.sum() * dt;
    const double true_energy = true_outputs.sum() * dt;
    if (!(true_energy > 0.0)) throw NumericError("energy_error_pct: zero true energy");
    return 100.0 * std::abs(pred_energy - true_energy) / true_energy;
}

namespace {

Eigen::MatrixXd input_matrix(const Trajectory& traj) {
    Eigen::MatrixXd u(2, traj.transitions());
    for (int k = 0; k < traj.transitions(); ++k) {
        u(0, k) = traj.inputs[k].mdot_fan;
        u(1, k) = traj.inputs[k].omega_cmp;
    }
    return u;
}

Eigen::MatrixXd disturbance_matrix(const Trajectory& traj) {
    Eigen::MatrixXd w(3, traj.transitions());
    for (int k = 0; k < traj.transitions(); ++k) {
        w(0, k) = traj.disturbances[k].t_ac_in;
        w(1, k) = traj.disturbances[k].v_veh;
        w(2, k) = traj.disturbances[k].omega_blw;
    }
    return w;
}

Eigen::MatrixXd state_matrix(const Trajectory& traj) {
    Eigen::MatrixXd x(3, traj.states.size());
    for (std::size_t k = 0; k < traj.states.size(); ++k) x.col(k) = traj.states[k].vec();
    return x;
}

Eigen::MatrixXd output_matrix(const Trajectory& traj) {
    Eigen::MatrixXd y(2, traj.outputs.size());
    for (std::size_t k = 0; k < traj.outputs.size(); ++k) {
        y(0, k) = traj.outputs[k].p_cmp;
        y(1, k) = traj.outputs[k].p_fan;
    }
    return y;
}

}  // namespace

MetricsReport evaluate_model(const KoopmanModel& model, const std::vector<Trajectory>& test,
                             const PredictOptions& opt) {
    MetricsReport report;
    report.dict_kind = model.dictionary->kind();
    report.n_lift = model.n_lift();

    std::vector<Eigen::MatrixXd> pred_states, true_states;
    double pct_acc[3] = {0.0, 0.0, 0.0};
    double pct_power_acc = 0.0;
    double energy_acc = 0.0;
    int power_count = 0;

    for (const Trajectory& traj : test) {
        if (traj.transitions() == 0) continue;
        const Eigen::MatrixXd u = input_matrix(traj);
        const Eigen::MatrixXd w = disturbance_matrix(traj);
        PredictionResult pred;
        try {
            pred = predict(model, traj.states.front(), u, w, opt);
        } catch (const TrajectoryDiverged&) {
            ++report.diverged;
            continue;
        }
        if (!pred.states.allFinite()) {
            ++report.diverged;
            continue;
        }
        const Eigen::MatrixXd truth = state_matrix(traj);
        pred_states.push_back(pred.states);
        true_states.push_back(truth);
        for (int s = 0; s < 3; ++s) {
            pct_acc[s] += pct_rmse(pred.states.row(s).transpose(), truth.row(s).transpose());
        }
        if (model.n_outputs() == 2 && !traj.outputs.empty()) {
            const Eigen::MatrixXd y_true = output_matrix(traj);
            // truth covers times 0..T-2; compare predictions on that window
            const Eigen::MatrixXd y_pred = pred.outputs.leftCols(y_true.cols());
            const Eigen::VectorXd total_pred = y_pred.colwise().sum().transpose();
            const Eigen::VectorXd total_true = y_true.colwise().sum().transpose();
            pct_power_acc += pct_rmse(total_pred, total_true);
            energy_acc += energy_error_pct(y_pred, y_true, traj.dt);
            ++power_count;
        }
    }

    report.n_sim = static_cast<int>(pred_states.size());
    if (report.n_sim > 0) {
        report.rmse_avg_states = rmse_avg(pred_states, true_states);
        for (int s = 0; s < 3; ++s) report.pct_rmse_states[s] = pct_acc[s] / report.n_sim;
    }
    if (power_count > 0) {
        report.pct_rmse_power = pct_power_acc / power_count;
        report.energy_error = energy_acc / power_count;
    }
    return report;
}

double normalized_state_score(const KoopmanModel& model, const std::vector<Trajectory>& test,
                              const Eigen::Vector3d& train_std) {
    const MetricsReport report = evaluate_model(model, test, PredictOptions{});
    if (report.n_sim == 0) throw NumericError("no test trajectory survived prediction");
    double score = 0.0;
    for (int s = 0; s < 3; ++s) {
        const double denom = train_std[s] > 0.0 ? train_std[s] : 1.0;
        score += report.rmse_avg_states[s] / denom;
    }
    return score;
}

GridSearchResult grid_search(const SnapshotDataset& train, const std::vector<Trajectory>& test,
                             const TuneGrid& grid, std::uint64_t seed, double rcond) {
    grid.validate();
    const Normalization norm = Normalization::fit(train.X);
    const Eigen::Vector3d train_std = norm.scale;

    std::vector<GridPoint> table;
    for (RbfKind kind : grid.kinds) {
        for (int n : grid.n_values) {
            for (double eps : grid.eps_values) {
                table.push_back({kind, n, eps});
            }
        }
    }

    // Each grid point is independent; evaluate in parallel into its own slot.
    parallel_for(static_cast<int>(table.size()), [&](int i) {
        GridPoint& pt = table[i];
        try {
            auto dict = build_rbf_dictionary(train, pt.n_lift, pt.kind, pt.eps, seed);
            const KoopmanModel model = fit_koopman(train, dict, rcond);
            pt.score = normalized_state_score(model, test, train_std);
        } catch (const std::exception& e) {
            pt.failed = true;
            pt.error = e.what();
        }
    });

    auto kind_index = [&](RbfKind k) {
        for (std::size_t i = 0; i < grid.kinds.size(); ++i) {
            if (grid.kinds[i] == k) return i;
        }
        return grid.kinds.size();
    };
    // argmin with deterministic tie-break: smaller N, then smaller eps, then
    // kind order as listed in the grid
    const GridPoint* best = nullptr;
    for (const GridPoint& pt : table) {
        if (pt.failed) continue;
        if (!best || pt.score < best->score ||
            (pt.score == best->score &&
             std::tuple(pt.n_lift, pt.eps, kind_index(pt.kind)) <
                 std::tuple(best->n_lift, best->eps, kind_index(best->kind)))) {
            best = &pt;
        }
    }
    if (!best) throw NumericError("every grid point failed");
    return {*best, table};
}

}  // namespace koop
