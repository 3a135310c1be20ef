#include "koop/nn_dictionary.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace koop {

namespace {
constexpr int kHiddenLayers = 3;
}

NeuralDictionary::NeuralDictionary(MlpParams theta, Normalization norm, int n_lift)
    : theta_(std::move(theta)), norm_(std::move(norm)), n_lift_(n_lift) {
    if (n_lift < 3) throw ConfigError("neural dictionary requires N >= 3");
    if (n_lift > 3 && theta_.weights.size() != kHiddenLayers + 1) {
        throw ConfigError("neural dictionary expects 3 hidden layers plus a linear output");
    }
}

Eigen::MatrixXd NeuralDictionary::features(const Eigen::MatrixXd& x_normalized) const {
    if (n_lift_ == 3) return Eigen::MatrixXd(0, x_normalized.cols());
    Eigen::MatrixXd a = x_normalized;
    for (int l = 0; l < kHiddenLayers; ++l) {
        a = ((theta_.weights[l] * a).colwise() + theta_.biases[l]).array().tanh().matrix();
    }
    return (theta_.weights[kHiddenLayers] * a).colwise() + theta_.biases[kHiddenLayers];
}

Eigen::VectorXd NeuralDictionary::lift(const Eigen::Vector3d& x) const {
    Eigen::VectorXd z(n_lift_);
    z.head<3>() = x;
    if (n_lift_ > 3) {
        z.tail(n_lift_ - 3) = features(norm_.apply(x));
    }
    return z;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

NnTrainer::NnTrainer(const SnapshotDataset& dataset, int n_lift, NnHyperparams hp,
                     std::uint64_t seed)
    : n_lift_(n_lift), n_feat_(n_lift - 3), hp_(hp), rng_(RngStream::derive(seed, 0x6e6eULL)) {
    hp_.validate();
    if (n_lift < 3) throw ConfigError("train_nn_dictionary requires N >= 3");
    if (dataset.columns() == 0) throw ConfigError("train_nn_dictionary requires a non-empty dataset");

    norm_ = Normalization::fit(dataset.X);
    x_raw_ = dataset.X;
    xp_raw_ = dataset.Xp;
    u_ = dataset.U;
    w_ = dataset.W;
    x_norm_.resize(3, dataset.X.cols());
    xp_norm_.resize(3, dataset.X.cols());
    for (Eigen::Index j = 0; j < dataset.X.cols(); ++j) {
        x_norm_.col(j) = norm_.apply(dataset.X.col(j));
        xp_norm_.col(j) = norm_.apply(dataset.Xp.col(j));
    }

    // scaled-uniform (fan-in) init; biases start at zero
    if (n_feat_ > 0) {
        const int hidden = 2 * n_lift_;
        std::vector<int> sizes = {3, hidden, hidden, hidden, n_feat_};
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const int fan_in = sizes[l];
            const int fan_out = sizes[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            Eigen::MatrixXd wmat(fan_out, fan_in);
            for (int r = 0; r < fan_out; ++r) {
                for (int c = 0; c < fan_in; ++c) wmat(r, c) = rng_.uniform(-bound, bound);
            }
            theta_.weights.push_back(std::move(wmat));
            theta_.biases.push_back(Eigen::VectorXd::Zero(fan_out));
        }
        adam_m_ = Eigen::VectorXd::Zero(theta_.parameter_count());
        adam_v_ = Eigen::VectorXd::Zero(theta_.parameter_count());
    }
    refit_operator();
}

Eigen::MatrixXd NnTrainer::mlp_forward(const Eigen::MatrixXd& input,
                                       std::vector<Eigen::MatrixXd>* activations) const {
    if (n_feat_ == 0) return Eigen::MatrixXd(0, input.cols());
    Eigen::MatrixXd a = input;
    if (activations) activations->clear();
    for (int l = 0; l < kHiddenLayers; ++l) {
        a = ((theta_.weights[l] * a).colwise() + theta_.biases[l]).array().tanh().matrix();
        if (activations) activations->push_back(a);
    }
    return (theta_.weights[kHiddenLayers] * a).colwise() + theta_.biases[kHiddenLayers];
}

void NnTrainer::mlp_backward(const Eigen::MatrixXd& input,
                             const std::vector<Eigen::MatrixXd>& activations,
                             const Eigen::MatrixXd& out_grad, MlpParams* grad) const {
    // output layer
    grad->weights[kHiddenLayers] += out_grad * activations[kHiddenLayers - 1].transpose();
    grad->biases[kHiddenLayers] += out_grad.rowwise().sum();
    Eigen::MatrixXd delta = theta_.weights[kHiddenLayers].transpose() * out_grad;
    for (int l = kHiddenLayers - 1; l >= 0; --l) {
        // tanh' = 1 - tanh^2 at the stored activation
        delta = (delta.array() * (1.0 - activations[l].array().square())).matrix();
        const Eigen::MatrixXd& prev = l == 0 ? input : activations[l - 1];
        grad->weights[l] += delta * prev.transpose();
        grad->biases[l] += delta.rowwise().sum();
        if (l > 0) delta = theta_.weights[l].transpose() * delta;
    }
}

void NnTrainer::refit_operator() {
    const Eigen::Index m = x_raw_.cols();
    const Eigen::Index rows = n_lift_ + u_.rows() + w_.rows();
    Eigen::MatrixXd g(rows, m);
    g.topRows(3) = x_raw_;
    if (n_feat_ > 0) g.middleRows(3, n_feat_) = mlp_forward(x_norm_, nullptr);
    if (u_.rows() > 0) g.middleRows(n_lift_, u_.rows()) = u_;
    if (w_.rows() > 0) g.bottomRows(w_.rows()) = w_;

    Eigen::MatrixXd zp(n_lift_, m);
    zp.topRows(3) = xp_raw_;
    if (n_feat_ > 0) zp.bottomRows(n_feat_) = mlp_forward(xp_norm_, nullptr);

    Eigen::MatrixXd gram = g * g.transpose();
    gram.diagonal().array() += hp_.ridge;
    k_ = gram.ldlt().solve(g * zp.transpose()).transpose();
}

double NnTrainer::full_batch_loss() const {
    const Eigen::Index m = x_raw_.cols();
    Eigen::MatrixXd g(n_lift_ + u_.rows() + w_.rows(), m);
    g.topRows(3) = x_raw_;
    if (n_feat_ > 0) g.middleRows(3, n_feat_) = mlp_forward(x_norm_, nullptr);
    if (u_.rows() > 0) g.middleRows(n_lift_, u_.rows()) = u_;
    if (w_.rows() > 0) g.bottomRows(w_.rows()) = w_;

    Eigen::MatrixXd zp(n_lift_, m);
    zp.topRows(3) = xp_raw_;
    if (n_feat_ > 0) zp.bottomRows(n_feat_) = mlp_forward(xp_norm_, nullptr);

    return (zp - k_ * g).squaredNorm();
}

MlpParams NnTrainer::batch_gradient(const std::vector<int>& columns) const {
    if (n_feat_ == 0) return MlpParams{};
    const Eigen::Index b = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd xn(3, b), xpn(3, b), xr(3, b), xpr(3, b);
    Eigen::MatrixXd ub(u_.rows(), b), wb(w_.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const int c = columns[i];
        xn.col(i) = x_norm_.col(c);
        xpn.col(i) = xp_norm_.col(c);
        xr.col(i) = x_raw_.col(c);
        xpr.col(i) = xp_raw_.col(c);
        if (u_.rows() > 0) ub.col(i) = u_.col(c);
        if (w_.rows() > 0) wb.col(i) = w_.col(c);
    }

    std::vector<Eigen::MatrixXd> act_x, act_xp;
    const Eigen::MatrixXd feat_x = mlp_forward(xn, &act_x);
    const Eigen::MatrixXd feat_xp = mlp_forward(xpn, &act_xp);

    Eigen::MatrixXd g(n_lift_ + u_.rows() + w_.rows(), b);
    g.topRows(3) = xr;
    g.middleRows(3, n_feat_) = feat_x;
    if (u_.rows() > 0) g.middleRows(n_lift_, u_.rows()) = ub;
    if (w_.rows() > 0) g.bottomRows(w_.rows()) = wb;

    Eigen::MatrixXd zp(n_lift_, b);
    zp.topRows(3) = xpr;
    zp.bottomRows(n_feat_) = feat_xp;

    const Eigen::MatrixXd residual = zp - k_ * g;  // N x b

    MlpParams grad;
    for (const auto& wm : theta_.weights) grad.weights.push_back(Eigen::MatrixXd::Zero(wm.rows(), wm.cols()));
    for (const auto& bv : theta_.biases) grad.biases.push_back(Eigen::VectorXd::Zero(bv.size()));

    // dL/d feat(x+) = 2 R_trainable ; dL/d feat(x) = -2 (K_z^T R)_trainable
    const Eigen::MatrixXd grad_feat_xp = 2.0 * residual.bottomRows(n_feat_);
    const Eigen::MatrixXd kz_t_r = k_.leftCols(n_lift_).transpose() * residual;
    const Eigen::MatrixXd grad_feat_x = -2.0 * kz_t_r.middleRows(3, n_feat_);

    mlp_backward(xpn, act_xp, grad_feat_xp, &grad);
    mlp_backward(xn, act_x, grad_feat_x, &grad);

    // mean over the batch keeps step sizes comparable across batch sizes
    const double inv_b = 1.0 / static_cast<double>(b);
    for (auto& wm : grad.weights) wm *= inv_b;
    for (auto& bv : grad.biases) bv *= inv_b;
    return grad;
}

Eigen::VectorXd NnTrainer::flatten_theta() const {
    Eigen::VectorXd flat(theta_.parameter_count());
    Eigen::Index pos = 0;
    for (const auto& wm : theta_.weights) {
        flat.segment(pos, wm.size()) = Eigen::Map<const Eigen::VectorXd>(wm.data(), wm.size());
        pos += wm.size();
    }
    for (const auto& bv : theta_.biases) {
        flat.segment(pos, bv.size()) = bv;
        pos += bv.size();
    }
    return flat;
}

void NnTrainer::set_theta(const Eigen::VectorXd& flat) {
    if (flat.size() != theta_.parameter_count()) throw ConfigError("theta size mismatch");
    Eigen::Index pos = 0;
    for (auto& wm : theta_.weights) {
        wm = Eigen::Map<const Eigen::MatrixXd>(flat.data() + pos, wm.rows(), wm.cols());
        pos += wm.size();
    }
    for (auto& bv : theta_.biases) {
        bv = flat.segment(pos, bv.size());
        pos += bv.size();
    }
}

Eigen::VectorXd NnTrainer::full_batch_gradient() const {
    std::vector<int> all(x_raw_.cols());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const MlpParams grad = batch_gradient(all);
    // batch_gradient returns the per-sample mean; rescale to the sum loss
    Eigen::VectorXd flat(theta_.parameter_count());
    Eigen::Index pos = 0;
    const double scale = static_cast<double>(all.size());
    for (const auto& wm : grad.weights) {
        flat.segment(pos, wm.size()) =
            scale * Eigen::Map<const Eigen::VectorXd>(wm.data(), wm.size());
        pos += wm.size();
    }
    for (const auto& bv : grad.biases) {
        flat.segment(pos, bv.size()) = scale * bv;
        pos += bv.size();
    }
    return flat;
}

void NnTrainer::adam_step(const MlpParams& grad) {
    Eigen::VectorXd g(theta_.parameter_count());
    Eigen::Index pos = 0;
    for (const auto& wm : grad.weights) {
        g.segment(pos, wm.size()) = Eigen::Map<const Eigen::VectorXd>(wm.data(), wm.size());
        pos += wm.size();
    }
    for (const auto& bv : grad.biases) {
        g.segment(pos, bv.size()) = bv;
        pos += bv.size();
    }

    ++adam_t_;
    adam_m_ = hp_.adam_beta1 * adam_m_ + (1.0 - hp_.adam_beta1) * g;
    adam_v_ = hp_.adam_beta2 * adam_v_.array().matrix() +
              (1.0 - hp_.adam_beta2) * g.array().square().matrix();
    const double bc1 = 1.0 - std::pow(hp_.adam_beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(hp_.adam_beta2, static_cast<double>(adam_t_));
    Eigen::VectorXd theta = flatten_theta();
    theta.array() -= hp_.learning_rate * (adam_m_.array() / bc1) /
                     ((adam_v_.array() / bc2).sqrt() + hp_.adam_eps);
    set_theta(theta);
}

NnTrainResult NnTrainer::train() {
    NnTrainResult result;
    double best_loss = full_batch_loss();
    MlpParams best_theta = theta_;
    result.loss_history.push_back(best_loss);
    if (!std::isfinite(best_loss)) throw TrainingDiverged("initial loss is non-finite", 0);

    const Eigen::Index m = x_raw_.cols();
    std::vector<int> order(m);
    for (Eigen::Index i = 0; i < m; ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= hp_.epochs && n_feat_ > 0; ++epoch) {
        if (best_loss < hp_.tolerance) break;
        if (epoch > 1) refit_operator();

        rng_.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(hp_.minibatch)) {
            const std::size_t stop = std::min(order.size(), start + hp_.minibatch);
            std::vector<int> batch(order.begin() + start, order.begin() + stop);
            adam_step(batch_gradient(batch));
        }

        const double loss = full_batch_loss();
        if (!std::isfinite(loss)) throw TrainingDiverged("training loss is non-finite", epoch);
        if (loss < best_loss) {
            best_loss = loss;
            best_theta = theta_;
        }
        result.loss_history.push_back(best_loss);
    }

    result.dictionary = std::make_shared<NeuralDictionary>(std::move(best_theta), norm_, n_lift_);
    return result;
}

NnTrainResult train_nn_dictionary(const SnapshotDataset& dataset, int n_lift,
                                  const NnHyperparams& hp, std::uint64_t seed) {
    NnTrainer trainer(dataset, n_lift, hp, seed);
    return trainer.train();
}

}  // namespace koop
