// Test-only oracles kept independent of the implementation paths they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "koop/edmd.hpp"
#include "koop/plant.hpp"
#include "koop/util.hpp"

namespace koop::testing {

/// Locates an equilibrium of the plant derivative under constant (u, w) by
/// damped Newton iteration with a finite-difference Jacobian.
inline PlantState find_equilibrium(const PlantState& guess, const ControlInput& u,
                                   const Disturbance& w, const PlantParams& p,
                                   int max_iter = 200) {
    Eigen::Vector3d x = guess.vec();
    const auto f = [&](const Eigen::Vector3d& s) {
        return plant_derivative(PlantState::from_vec(s), u, w, p);
    };
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::Vector3d r = f(x);
        if (r.norm() < 1e-12) break;
        Eigen::Matrix3d jac;
        for (int c = 0; c < 3; ++c) {
            const double h = std::max(1e-6, 1e-7 * std::abs(x[c]));
            Eigen::Vector3d xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            jac.col(c) = (f(xp) - f(xm)) / (2.0 * h);
        }
        Eigen::Vector3d step = jac.fullPivLu().solve(-r);
        double damping = 1.0;
        while (damping > 1e-8 && f(x + damping * step).norm() >= r.norm()) damping *= 0.5;
        x += damping * step;
    }
    return PlantState::from_vec(x);
}

/// Direct transcription of the one-step-corrected prediction loop, written
/// independently of predict() for bit-for-bit comparison.
inline PredictionResult naive_predict(const KoopmanModel& model, const PlantState& x0,
                                      const Eigen::MatrixXd& u_seq, const Eigen::MatrixXd& w_seq,
                                      bool correction) {
    const Eigen::Index horizon = u_seq.cols();
    PredictionResult res;
    res.states.resize(3, horizon + 1);
    res.outputs.resize(model.n_outputs(), horizon + 1);

    Eigen::VectorXd z = model.dictionary->lift(x0.vec());
    res.states.col(0) = x0.vec();
    if (model.n_outputs() > 0) res.outputs.col(0) = model.E * z;
    for (Eigen::Index k = 0; k < horizon; ++k) {
        Eigen::VectorXd z_next = model.A * z + model.B * u_seq.col(k) + model.D * w_seq.col(k);
        const Eigen::Vector3d x_hat = z_next.head<3>();
        res.states.col(k + 1) = x_hat;
        if (model.n_outputs() > 0) res.outputs.col(k + 1) = model.E * z_next;
        if (correction) z_next = model.dictionary->lift(x_hat);
        z = z_next;
    }
    return res;
}

/// Dictionary whose trainable coordinates are deterministic white noise in the
/// state (hash-based), i.e. features carrying no dynamical information.
class NoiseDictionary final : public Dictionary {
public:
    NoiseDictionary(int n_lift, std::uint64_t seed) : n_lift_(n_lift), seed_(seed) {}

    int lifted_dim() const override { return n_lift_; }
    std::string kind() const override { return "noise"; }

    Eigen::VectorXd lift(const Eigen::Vector3d& x) const override {
        Eigen::VectorXd z(n_lift_);
        z.head<3>() = x;
        std::uint64_t h = seed_;
        for (int i = 0; i < 3; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &x[i], 8);
            h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        for (int j = 3; j < n_lift_; ++j) {
            std::uint64_t state = h ^ (0xa0761d6478bd642fULL * static_cast<std::uint64_t>(j));
            const std::uint64_t r = splitmix64(state);
            z[j] = 2.0 * (static_cast<double>(r >> 11) * 0x1.0p-53) - 1.0;
        }
        return z;
    }

private:
    int n_lift_;
    std::uint64_t seed_;
};

/// Random lifted-linear system z+ = A0 z + B0 u + D0 w with spectral radius
/// brought to the requested value; used to test exact recovery.
struct LiftedLinearSystem {
    Eigen::MatrixXd a, b, d;

    static LiftedLinearSystem random(int n, int n_u, int n_w, double spectral_radius,
                                     std::uint64_t seed) {
        RngStream rng(seed);
        auto fill = [&rng](Eigen::Index rows, Eigen::Index cols) {
            Eigen::MatrixXd m(rows, cols);
            for (Eigen::Index c = 0; c < cols; ++c) {
                for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
            }
            return m;
        };
        LiftedLinearSystem sys;
        sys.a = fill(n, n);
        const double radius = sys.a.eigenvalues().cwiseAbs().maxCoeff();
        sys.a *= spectral_radius / radius;
        sys.b = fill(n, n_u);
        sys.d = fill(n, n_w);
        return sys;
    }
};

/// Snapshot data from the 3-state lifted-linear system under random
/// persistently exciting inputs (no output rows).
inline SnapshotDataset linear_system_data(const LiftedLinearSystem& sys, int samples,
                                          std::uint64_t seed) {
    RngStream rng(seed);
    SnapshotDataset ds;
    ds.X.resize(3, samples);
    ds.Xp.resize(3, samples);
    ds.U.resize(sys.b.cols(), samples);
    ds.W.resize(sys.d.cols(), samples);
    ds.Y.resize(0, samples);
    Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    for (int k = 0; k < samples; ++k) {
        Eigen::VectorXd u(sys.b.cols()), w(sys.d.cols());
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
        const Eigen::Vector3d xp = sys.a * x + sys.b * u + sys.d * w;
        ds.X.col(k) = x;
        ds.Xp.col(k) = xp;
        ds.U.col(k) = u;
        ds.W.col(k) = w;
        ds.provenance.emplace_back(0, k);
        x = xp;
    }
    return ds;
}

/// Synthetic 3-state nonlinear plant whose true lift is a gaussian RBF
/// dictionary with unit shape parameter, built so the state standard
/// deviations come out near 1 (the dictionary's normalization is then close
/// to the identity and the matched kernel is identifiable).
struct GaussianFeaturePlant {
    Eigen::MatrixXd centers;  // 3 x 5
    double eps;
    Eigen::MatrixXd a, b, d;

    static GaussianFeaturePlant make(double eps, std::uint64_t seed) {
        RngStream rng(seed);
        GaussianFeaturePlant plant;
        plant.eps = eps;
        plant.centers.resize(3, 5);
        for (int c = 0; c < 5; ++c) {
            for (int i = 0; i < 3; ++i) plant.centers(i, c) = rng.uniform(-1.2, 1.2);
        }
        auto fill = [&rng](Eigen::Index rows, Eigen::Index cols, double scale) {
            Eigen::MatrixXd m(rows, cols);
            for (Eigen::Index cc = 0; cc < cols; ++cc) {
                for (Eigen::Index rr = 0; rr < rows; ++rr) m(rr, cc) = scale * rng.normal();
            }
            return m;
        };
        plant.a = Eigen::MatrixXd::Zero(3, 8);
        plant.a.leftCols(3) = 0.55 * Eigen::MatrixXd::Identity(3, 3);
        plant.a.rightCols(5) = fill(3, 5, 0.45);
        plant.b = fill(3, 2, 0.52);
        plant.d = fill(3, 3, 0.42);
        // per-channel gain trim so the state std comes out near 1
        const Eigen::Vector3d trim(1.0, 1.45, 1.04);
        plant.b = trim.asDiagonal() * plant.b;
        plant.d = trim.asDiagonal() * plant.d;
        return plant;
    }

    Eigen::VectorXd lift(const Eigen::Vector3d& x) const {
        Eigen::VectorXd z(8);
        z.head<3>() = x;
        for (int c = 0; c < 5; ++c) {
            z[3 + c] = std::exp(-eps * eps * (x - centers.col(c)).squaredNorm());
        }
        return z;
    }

    Trajectory simulate(const Eigen::Vector3d& x0, int steps, std::uint64_t seed) const {
        RngStream rng(seed);
        Trajectory traj;
        Eigen::Vector3d x = x0;
        traj.states.push_back({x[0], x[1], x[2]});
        for (int k = 0; k < steps; ++k) {
            const Eigen::Vector2d u(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            const Eigen::Vector3d w(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                    rng.uniform(-1.0, 1.0));
            const Eigen::Vector3d xp = a * lift(x) + b * u + d * w;
            traj.inputs.push_back({u[0], u[1]});
            traj.disturbances.push_back({w[0], w[1], w[2]});
            traj.outputs.push_back({0.0, 0.0});
            traj.states.push_back({xp[0], xp[1], xp[2]});
            x = xp;
        }
        return traj;
    }
};

inline SnapshotDataset gaussian_plant_dataset(const GaussianFeaturePlant& plant, int trajectories,
                                              int steps, std::uint64_t seed) {
    std::vector<Trajectory> trajs;
    RngStream rng(seed);
    for (int i = 0; i < trajectories; ++i) {
        const Eigen::Vector3d x0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        trajs.push_back(plant.simulate(x0, steps, seed + 100 + i));
    }
    SnapshotDataset ds = assemble_snapshots(trajs);
    ds.Y.resize(0, ds.columns());  // the synthetic plant has no power outputs
    return ds;
}

}  // namespace koop::testing
