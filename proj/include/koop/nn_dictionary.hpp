#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "koop/dictionary.hpp"

namespace koop {

struct NnHyperparams {
    double learning_rate = 1e-4;  // delta
    double tolerance = 1e-3;      // epsilon: stop when the full-batch loss drops below it
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 50;
    int minibatch = 256;
    double ridge = 1e-6;  // regularization of the closed-form operator refit

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("nn learning rate must be positive");
        if (!(tolerance > 0.0)) throw ConfigError("nn tolerance must be positive");
        if (epochs < 1) throw ConfigError("nn epochs must be >= 1");
        if (minibatch < 1) throw ConfigError("nn minibatch must be >= 1");
    }
};

/// Weights of the fixed architecture: 3 hidden tanh layers of 2N neurons and
/// a linear output of width N-3 (empty when N = 3).
struct MlpParams {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int parameter_count() const {
        int n = 0;
        for (const auto& w : weights) n += static_cast<int>(w.size());
        for (const auto& b : biases) n += static_cast<int>(b.size());
        return n;
    }
};

/// Learned dictionary: lift(x) = [x; MLP(normalize(x))]. The state
/// pass-through is architectural, not learned.
class NeuralDictionary final : public Dictionary {
public:
    NeuralDictionary(MlpParams theta, Normalization norm, int n_lift);

    int lifted_dim() const override { return n_lift_; }
    Eigen::VectorXd lift(const Eigen::Vector3d& x) const override;
    std::string kind() const override { return "nn"; }

    /// Trainable features for a batch of normalized inputs; (N-3) x M.
    Eigen::MatrixXd features(const Eigen::MatrixXd& x_normalized) const;

    const MlpParams& params() const { return theta_; }
    const Normalization& normalization() const { return norm_; }

private:
    MlpParams theta_;
    Normalization norm_;
    int n_lift_;
};

struct NnTrainResult {
    std::shared_ptr<NeuralDictionary> dictionary;
    /// Best-checkpoint loss curve: entry 0 is the loss at the initial weights
    /// (after the first closed-form operator fit), entry e the best full-batch
    /// loss seen through epoch e. Non-increasing by construction.
    std::vector<double> loss_history;
};

/// Alternating optimization: per epoch, refit K = [A B D] in closed form
/// (ridge-regularized least squares) with the weights frozen, then run
/// minibatch Adam on the one-step lifted prediction loss with K frozen.
/// Stops early when the full-batch loss drops below hp.tolerance.
NnTrainResult train_nn_dictionary(const SnapshotDataset& dataset, int n_lift,
                                  const NnHyperparams& hp, std::uint64_t seed);

/// Training internals, exposed so tests can probe the loss and its gradient
/// directly (e.g. against finite differences).
class NnTrainer {
public:
    NnTrainer(const SnapshotDataset& dataset, int n_lift, NnHyperparams hp, std::uint64_t seed);

    /// Closed-form refit of K from the current weights.
    void refit_operator();

    /// Sum over all snapshot pairs of |Psi(x+) - K [Psi(x); u; w]|^2 with the
    /// current K and weights.
    double full_batch_loss() const;

    /// Gradient of full_batch_loss with respect to the flattened weights.
    Eigen::VectorXd full_batch_gradient() const;

    Eigen::VectorXd flatten_theta() const;
    void set_theta(const Eigen::VectorXd& flat);

    const Eigen::MatrixXd& koopman_operator() const { return k_; }

    NnTrainResult train();

private:
    Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& input,
                                std::vector<Eigen::MatrixXd>* activations) const;
    void mlp_backward(const Eigen::MatrixXd& input, const std::vector<Eigen::MatrixXd>& activations,
                      const Eigen::MatrixXd& out_grad, MlpParams* grad) const;
    /// Gradient of the per-sample-mean loss over the given columns.
    MlpParams batch_gradient(const std::vector<int>& columns) const;
    void adam_step(const MlpParams& grad);

    int n_lift_;
    int n_feat_;  // N - 3
    NnHyperparams hp_;
    Normalization norm_;
    MlpParams theta_;
    Eigen::MatrixXd k_;  // N x (N + n_u + n_w)

    // training data (fixed)
    Eigen::MatrixXd x_raw_, xp_raw_;    // 3 x M
    Eigen::MatrixXd x_norm_, xp_norm_;  // 3 x M
    Eigen::MatrixXd u_, w_;

    // Adam state
    Eigen::VectorXd adam_m_, adam_v_;
    long adam_t_ = 0;
    RngStream rng_;
};

}  // namespace koop
