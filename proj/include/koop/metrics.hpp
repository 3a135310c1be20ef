#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "koop/datagen.hpp"
#include "koop/dictionary.hpp"
#include "koop/edmd.hpp"

namespace koop {

/// Per-row average RMSE over a list of prediction/truth series pairs:
/// (1/N_sim) * sum_j sqrt(sum_k e_jk^2 / K_j), computed independently for each
/// row (state or output channel).
Eigen::VectorXd rmse_avg(const std::vector<Eigen::MatrixXd>& predictions,
                         const std::vector<Eigen::MatrixXd>& truths);

/// RMSE of one channel normalized by the true signal's range, in percent.
/// Throws on a constant truth series (normalization undefined).
double pct_rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth);

/// |predicted - true| cumulative total energy, relative to the true total, in
/// percent. Series rows are summed (compressor + fan) before integration.
double energy_error_pct(const Eigen::MatrixXd& predicted_outputs,
                        const Eigen::MatrixXd& true_outputs, double dt);

struct MetricsReport {
    std::string dict_kind;
    int n_lift = 0;
    double eps = 0.0;
    int n_sim = 0;       // trajectories included in the averages
    int diverged = 0;    // trajectories excluded because prediction diverged
    Eigen::Vector3d rmse_avg_states = Eigen::Vector3d::Zero();
    Eigen::Vector3d pct_rmse_states = Eigen::Vector3d::Zero();
    double pct_rmse_power = 0.0;   // total power channel
    double energy_error = 0.0;     // percent
    double ci = 0.0;               // consistency index
};

/// Evaluates one model over a test set via the one-step-corrected rollout.
/// Diverged trajectories are excluded from the averages and counted.
MetricsReport evaluate_model(const KoopmanModel& model, const std::vector<Trajectory>& test,
                             const PredictOptions& opt = {});

// ---------------------------------------------------------------------------
// Grid search for RBF hyperparameters
// ---------------------------------------------------------------------------

struct TuneGrid {
    std::vector<RbfKind> kinds;
    std::vector<int> n_values;
    std::vector<double> eps_values;

    void validate() const {
        if (kinds.empty() || n_values.empty() || eps_values.empty()) {
            throw ConfigError("tune grid must be non-empty");
        }
    }
};

struct GridPoint {
    RbfKind kind;
    int n_lift;
    double eps;
    double score = 0.0;  // sum over state channels of rmse_avg / train std
    bool failed = false;
    std::string error;
};

struct GridSearchResult {
    GridPoint best;
    std::vector<GridPoint> table;  // in grid order: kind, then N, then eps
};

/// Trains one model per grid point and scores it on the test trajectories
/// (prediction with correction on; per-channel rmse_avg normalized by the
/// training-set standard deviation). Failures are recorded in the table
/// instead of aborting the sweep. Ties break toward smaller N, then smaller
/// eps, then kind order.
GridSearchResult grid_search(const SnapshotDataset& train, const std::vector<Trajectory>& test,
                             const TuneGrid& grid, std::uint64_t seed, double rcond = 1e-10);

/// The grid-search score for an already-fitted model (exposed for tests and
/// for the sweep report).
double normalized_state_score(const KoopmanModel& model, const std::vector<Trajectory>& test,
                              const Eigen::Vector3d& train_std);

}  // namespace koop
