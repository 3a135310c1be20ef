#pragma once

#include <Eigen/Dense>
#include <optional>

#include "koop/datagen.hpp"
#include "koop/dictionary.hpp"

namespace koop {

/// Lifted LTI predictor z+ = A z + B u + D w with state projection
/// C = [I3 0] and power-output map E. The dictionary that produced the
/// lifted coordinates travels with the operators.
struct KoopmanModel {
    Eigen::MatrixXd A;  // N x N
    Eigen::MatrixXd B;  // N x n_u
    Eigen::MatrixXd D;  // N x n_w
    Eigen::MatrixXd E;  // n_y x N (empty when the dataset carries no outputs)
    DictionaryPtr dictionary;

    int n_lift() const { return static_cast<int>(A.rows()); }
    int n_inputs() const { return static_cast<int>(B.cols()); }
    int n_disturbances() const { return static_cast<int>(D.cols()); }
    int n_outputs() const { return static_cast<int>(E.rows()); }

    /// The fixed projection [I3 0], materialized on demand.
    Eigen::MatrixXd C() const {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, n_lift());
        c.topLeftCorner(3, 3).setIdentity();
        return c;
    }
};

struct PredictionResult {
    Eigen::MatrixXd states;   // 3 x (T+1); column 0 is the supplied initial state
    Eigen::MatrixXd outputs;  // n_y x (T+1)
    std::optional<Eigen::MatrixXd> lifted;  // N x (T+1) when requested
};

struct PredictOptions {
    bool correction = true;   // re-lift the projected state every step (Alg. 2)
    bool keep_lifted = false;
};

/// SVD-based Moore-Penrose pseudoinverse; singular values below
/// rcond * sigma_max are truncated.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rcond = 1e-10);

/// Least-squares fit of [A B D] = Z+ pinv([Z; U; W]) on the lifted snapshots,
/// plus the output map E = Y pinv(Z) when the dataset carries outputs.
/// Requires M >= N + n_u + n_w.
KoopmanModel fit_koopman(const SnapshotDataset& dataset, DictionaryPtr dict, double rcond = 1e-10);

/// E = Y pinv(Z); requires M >= N.
Eigen::MatrixXd fit_output_map(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                               double rcond = 1e-10);

/// Open-loop rollout with the one-step correction: z0 = lift(x0), then
/// z_{k+1} = A z_k + B u_k + D w_k, x^_{k+1} = C z_{k+1}, y^_{k+1} = E z_{k+1},
/// and (correction on) z_{k+1} <- lift(x^_{k+1}).
PredictionResult predict(const KoopmanModel& model, const PlantState& x0,
                         const Eigen::MatrixXd& u_seq, const Eigen::MatrixXd& w_seq,
                         const PredictOptions& opt = {});

/// Forward-backward spectral measure of how close the dictionary's span is to
/// a Koopman-invariant subspace: inputs are compensated with the fitted B, D,
/// then CI = max |eig(I - A_f A_b)| with A_f = Z~+ pinv(Z), A_b = Z pinv(Z~+).
double consistency_index(const SnapshotDataset& dataset, DictionaryPtr dict,
                         double rcond = 1e-10);

}  // namespace koop
