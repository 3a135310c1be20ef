#include <doctest.h>

#include <cmath>

#include "koop/edmd.hpp"
#include "koop/nn_dictionary.hpp"

using namespace koop;

namespace {

SnapshotDataset small_plant_dataset(int duration, std::uint64_t seed) {
    const PlantParams p;
    ExcitationSpec spec;
    spec.duration_s = duration;
    spec.rng_seed = seed;
    std::vector<Trajectory> trajs;
    trajs.push_back(simulate_trajectory({420.0, 1250.0, 24.0}, generate_excitation(spec), p));
    trajs.push_back(simulate_trajectory({460.0, 1350.0, 21.0},
                                        generate_excitation({.duration_s = double(duration),
                                                             .rng_seed = seed + 1}), p));
    return assemble_snapshots(trajs);
}

NnHyperparams quick_hyperparams(int epochs) {
    NnHyperparams hp;
    hp.epochs = epochs;
    return hp;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("lift passes the state through exactly and has the declared width") {
    const SnapshotDataset ds = small_plant_dataset(150, 7);
    const NnTrainResult res = train_nn_dictionary(ds, 12, quick_hyperparams(2), 5);
    const Eigen::Vector3d x(433.0, 1260.0, 22.0);
    const Eigen::VectorXd z = res.dictionary->lift(x);
    REQUIRE(z.size() == 12);
    CHECK(z[0] == x[0]);
    CHECK(z[1] == x[1]);
    CHECK(z[2] == x[2]);
    CHECK(z.allFinite());
}

TEST_CASE("loss history is the non-increasing best-checkpoint curve") {
    const SnapshotDataset ds = small_plant_dataset(250, 17);
    const NnTrainResult res = train_nn_dictionary(ds, 10, quick_hyperparams(8), 3);
    REQUIRE(res.loss_history.size() >= 2);
    for (std::size_t e = 1; e < res.loss_history.size(); ++e) {
        CHECK(res.loss_history[e] <= res.loss_history[e - 1]);
    }
    CHECK(res.loss_history.back() <= res.loss_history.front());
}

TEST_CASE("training is reproducible from the seed") {
    const SnapshotDataset ds = small_plant_dataset(120, 27);
    const NnTrainResult a = train_nn_dictionary(ds, 8, quick_hyperparams(3), 11);
    const NnTrainResult b = train_nn_dictionary(ds, 8, quick_hyperparams(3), 11);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t e = 0; e < a.loss_history.size(); ++e) {
        CHECK(a.loss_history[e] == b.loss_history[e]);
    }
    const Eigen::Vector3d probe(428.0, 1244.0, 23.5);
    CHECK(a.dictionary->lift(probe) == b.dictionary->lift(probe));
}

TEST_CASE("N = 3 degenerates to DMD with control on raw states") {
    const SnapshotDataset ds = small_plant_dataset(200, 37);
    const NnTrainResult res = train_nn_dictionary(ds, 3, quick_hyperparams(5), 2);
    CHECK(res.dictionary->lifted_dim() == 3);

    const KoopmanModel via_nn = fit_koopman(ds, res.dictionary);
    const KoopmanModel via_raw = fit_koopman(ds, std::make_shared<PolynomialDictionary>(1));
    CHECK((via_nn.A - via_raw.A).norm() < 1e-8);
    CHECK((via_nn.B - via_raw.B).norm() < 1e-8);
    CHECK((via_nn.D - via_raw.D).norm() < 1e-8);
}

TEST_CASE("analytic gradient matches central finite differences") {
    const SnapshotDataset ds = small_plant_dataset(60, 47);
    NnTrainer trainer(ds, 9, quick_hyperparams(1), 13);

    const Eigen::VectorXd theta0 = trainer.flatten_theta();
    const Eigen::VectorXd grad = trainer.full_batch_gradient();
    RngStream rng(57);
    const double h = 1e-5;
    // probe weights whose slope central differences can actually resolve;
    // near-zero-gradient weights only measure the O(h^2) truncation term
    const double resolvable = 1e-2 * grad.cwiseAbs().maxCoeff();
    int probes = 0;
    while (probes < 10) {
        const Eigen::Index i = rng.bounded(theta0.size());
        if (std::abs(grad[i]) < resolvable) continue;
        ++probes;
        Eigen::VectorXd theta = theta0;
        theta[i] = theta0[i] + h;
        trainer.set_theta(theta);
        const double up = trainer.full_batch_loss();
        theta[i] = theta0[i] - h;
        trainer.set_theta(theta);
        const double down = trainer.full_batch_loss();
        trainer.set_theta(theta0);
        const double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(std::abs(fd), std::abs(grad[i])));
    }
}

TEST_CASE("operator refit lowers the loss for frozen weights") {
    const SnapshotDataset ds = small_plant_dataset(150, 67);
    NnTrainer trainer(ds, 10, quick_hyperparams(1), 23);
    // perturb the operator away from the closed-form optimum
    const double optimal = trainer.full_batch_loss();
    Eigen::VectorXd theta = trainer.flatten_theta();
    theta.array() += 0.05;
    trainer.set_theta(theta);
    const double moved = trainer.full_batch_loss();
    trainer.refit_operator();
    const double refit = trainer.full_batch_loss();
    CHECK(refit <= moved);
    (void)optimal;
}

TEST_CASE("training rejects an empty dataset and bad hyperparameters") {
    const SnapshotDataset ds = small_plant_dataset(60, 77);
    NnHyperparams bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(train_nn_dictionary(ds, 8, bad, 1), ConfigError);
    NnHyperparams negative_lr;
    negative_lr.learning_rate = -1.0;
    CHECK_THROWS_AS(train_nn_dictionary(ds, 8, negative_lr, 1), ConfigError);
}

}  // TEST_SUITE
