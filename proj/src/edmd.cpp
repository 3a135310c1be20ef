#include "koop/edmd.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace koop {

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rcond) {
    if (!m.allFinite()) throw NumericError("pinv input contains non-finite entries");
    if (m.size() == 0) return Eigen::MatrixXd(m.cols(), m.rows());
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge in pinv");
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = rcond * (sv.size() > 0 ? sv[0] : 0.0);
    Eigen::VectorXd inv_sv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        inv_sv[i] = sv[i] > cutoff && sv[i] > 0.0 ? 1.0 / sv[i] : 0.0;
    }
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

Eigen::MatrixXd stack_rows(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u,
                           const Eigen::MatrixXd& w) {
    Eigen::MatrixXd g(z.rows() + u.rows() + w.rows(), z.cols());
    g.topRows(z.rows()) = z;
    if (u.rows() > 0) g.middleRows(z.rows(), u.rows()) = u;
    if (w.rows() > 0) g.bottomRows(w.rows()) = w;
    return g;
}

}  // namespace

KoopmanModel fit_koopman(const SnapshotDataset& dataset, DictionaryPtr dict, double rcond) {
    if (!dict) throw ConfigError("fit_koopman requires a dictionary");
    const Eigen::Index m = dataset.columns();
    const int n_lift = dict->lifted_dim();
    const Eigen::Index n_u = dataset.U.rows();
    const Eigen::Index n_w = dataset.W.rows();
    if (m < n_lift + n_u + n_w) {
        throw FitError("underdetermined fit: M = " + std::to_string(m) +
                       " columns for N = " + std::to_string(n_lift) + " lifted dimensions plus " +
                       std::to_string(n_u + n_w) + " input rows");
    }

    const Eigen::MatrixXd z = dict->lift_batch(dataset.X);
    const Eigen::MatrixXd zp = dict->lift_batch(dataset.Xp);
    if (!z.allFinite() || !zp.allFinite()) {
        throw FitError("lifted data contains non-finite entries");
    }

    const Eigen::MatrixXd g = stack_rows(z, dataset.U, dataset.W);
    const Eigen::MatrixXd g_pinv = pinv(g, rcond);
    const Eigen::MatrixXd abd = zp * g_pinv;

    KoopmanModel model;
    model.A = abd.leftCols(n_lift);
    model.B = abd.middleCols(n_lift, n_u);
    model.D = abd.rightCols(n_w);
    model.dictionary = std::move(dict);
    if (dataset.Y.rows() > 0 && dataset.Y.cols() == m) {
        model.E = fit_output_map(z, dataset.Y, rcond);
    } else {
        model.E.resize(0, n_lift);
    }
    return model;
}

Eigen::MatrixXd fit_output_map(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, double rcond) {
    if (z.cols() != y.cols()) throw FitError("output map fit: Z and Y column counts differ");
    if (z.cols() < z.rows()) {
        throw FitError("underdetermined output fit: M = " + std::to_string(z.cols()) +
                       " columns for N = " + std::to_string(z.rows()));
    }
    if (!z.allFinite() || !y.allFinite()) throw FitError("output fit data contains non-finite entries");
    return y * pinv(z, rcond);
}

PredictionResult predict(const KoopmanModel& model, const PlantState& x0,
                         const Eigen::MatrixXd& u_seq, const Eigen::MatrixXd& w_seq,
                         const PredictOptions& opt) {
    if (u_seq.cols() != w_seq.cols()) {
        throw ConfigError("predict: input and disturbance sequences must share a length");
    }
    if (u_seq.rows() != model.n_inputs() || w_seq.rows() != model.n_disturbances()) {
        throw ConfigError("predict: sequence row counts do not match the model");
    }
    const Eigen::Index horizon = u_seq.cols();
    const int n_lift = model.n_lift();
    const int n_y = model.n_outputs();

    PredictionResult res;
    res.states.resize(3, horizon + 1);
    res.outputs.resize(n_y, horizon + 1);
    if (opt.keep_lifted) res.lifted.emplace(n_lift, horizon + 1);

    Eigen::VectorXd z = model.dictionary->lift(x0.vec());
    res.states.col(0) = x0.vec();
    if (n_y > 0) res.outputs.col(0) = model.E * z;
    if (res.lifted) res.lifted->col(0) = z;

    for (Eigen::Index k = 0; k < horizon; ++k) {
        Eigen::VectorXd z_next = model.A * z + model.B * u_seq.col(k) + model.D * w_seq.col(k);
        const Eigen::Vector3d x_hat = z_next.head<3>();
        if (!x_hat.allFinite()) {
            throw TrajectoryDiverged("predicted state is non-finite", static_cast<int>(k));
        }
        res.states.col(k + 1) = x_hat;
        if (n_y > 0) res.outputs.col(k + 1) = model.E * z_next;
        if (opt.correction) z_next = model.dictionary->lift(x_hat);
        if (res.lifted) res.lifted->col(k + 1) = z_next;
        z = std::move(z_next);
    }
    return res;
}

double consistency_index(const SnapshotDataset& dataset, DictionaryPtr dict, double rcond) {
    const KoopmanModel model = fit_koopman(dataset, dict, rcond);
    const Eigen::MatrixXd z = model.dictionary->lift_batch(dataset.X);
    const Eigen::MatrixXd zp = model.dictionary->lift_batch(dataset.Xp);
    const Eigen::MatrixXd zt = zp - model.B * dataset.U - model.D * dataset.W;

    const Eigen::MatrixXd a_f = zt * pinv(z, rcond);
    const Eigen::MatrixXd a_b = z * pinv(zt, rcond);
    const Eigen::MatrixXd residual_op =
        Eigen::MatrixXd::Identity(a_f.rows(), a_f.rows()) - a_f * a_b;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(residual_op, /*computeEigenvectors=*/false);
    if (eig.info() != Eigen::Success) throw NumericError("eigen decomposition failed in consistency_index");
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace koop
