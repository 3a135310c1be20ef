#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "koop/plant.hpp"
#include "koop/util.hpp"

namespace koop {

// ---------------------------------------------------------------------------
// Excitation sampling
// ---------------------------------------------------------------------------

struct Range {
    double lo;
    double hi;
};

/// Validity ranges for input and disturbance generation.
struct ExcitationBounds {
    Range mdot_fan{0.01, 0.48};   // [kg/s]
    Range omega_cmp{13.0, 83.0};  // [Hz]
    Range t_ac_in{26.0, 34.0};    // [degC]
    Range v_veh{0.0, 80.0};       // [km/h]
    Range omega_blw{0.8, 1.6};    // [m/s]

    std::array<Range, 5> all() const { return {mdot_fan, omega_cmp, t_ac_in, v_veh, omega_blw}; }
};

/// Per-channel truncated-normal parameters; defaults are midpoint mean and
/// quarter-range standard deviation.
struct ChannelDistribution {
    double mean;
    double std;
};

struct ExcitationSpec {
    ExcitationBounds bounds;
    double hold_s = 60.0;  // seconds between input changes
    double duration_s = 2000.0;
    // Channel order: mdot_fan, omega_cmp, t_ac_in, v_veh, omega_blw.
    std::array<ChannelDistribution, 5> channels = defaults_for(ExcitationBounds{});
    std::uint64_t rng_seed = 0;

    static std::array<ChannelDistribution, 5> defaults_for(const ExcitationBounds& b);
    void validate() const;
};

/// Draws from normal(mean, std) conditioned on [lo, hi]: rejection sampling
/// with an inverse-CDF fallback after 100 rejections.
double sample_truncated_normal(double mean, double std, double lo, double hi, RngStream& rng);

// Analytic moments of the truncated normal (test oracle and documentation).
double truncated_normal_mean(double mean, double std, double lo, double hi);
double truncated_normal_var(double mean, double std, double lo, double hi);

struct ExcitationSequences {
    std::vector<ControlInput> inputs;
    std::vector<Disturbance> disturbances;
};

/// Piecewise-constant channels resampled every hold_s seconds on a 1 s grid;
/// reproducible from the spec's seed.
ExcitationSequences generate_excitation(const ExcitationSpec& spec);

// ---------------------------------------------------------------------------
// Trajectory simulation and snapshot assembly
// ---------------------------------------------------------------------------

/// One simulated run at dt = 1 s. states has T entries; inputs, disturbances
/// and outputs have T-1 (outputs[k] is the power draw at states[k] under
/// inputs[k]).
struct Trajectory {
    std::vector<PlantState> states;
    std::vector<ControlInput> inputs;
    std::vector<Disturbance> disturbances;
    std::vector<PlantOutput> outputs;
    double dt = 1.0;

    int transitions() const { return static_cast<int>(inputs.size()); }
};

/// Rolls the plant forward under the given sequences, logging outputs at every
/// step. Throws TrajectoryDiverged (with step index) if the plant leaves its
/// sanity envelope.
Trajectory simulate_trajectory(const PlantState& x0, const ExcitationSequences& seq,
                               const PlantParams& p);

/// Snapshot matrices stacked from consecutive pairs across trajectories.
/// Column k of Xp is the plant successor of column k of (X, U, W); Y holds the
/// power outputs at the X column's time. provenance[k] = (trajectory, time).
struct SnapshotDataset {
    Eigen::MatrixXd X;   // 3 x M
    Eigen::MatrixXd Xp;  // 3 x M
    Eigen::MatrixXd U;   // 2 x M
    Eigen::MatrixXd W;   // 3 x M
    Eigen::MatrixXd Y;   // 2 x M
    std::vector<std::pair<int, int>> provenance;

    Eigen::Index columns() const { return X.cols(); }
};

SnapshotDataset assemble_snapshots(const std::vector<Trajectory>& trajectories);

// ---------------------------------------------------------------------------
// Trajectory store (one CSV per trajectory)
// ---------------------------------------------------------------------------

/// CSV schema: t_s,p_e_kpa,p_c_kpa,t_cab_c,mdot_fan,omega_cmp,t_ac_in,v_veh,
/// omega_blw,p_cmp_w,p_fan_w. The final row carries the last state with the
/// preceding held inputs/outputs repeated, so files have exactly T rows.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace koop
