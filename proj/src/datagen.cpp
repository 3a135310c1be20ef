#include "koop/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace koop {

namespace {

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Inverse standard-normal CDF: Acklam's rational approximation polished with
/// one Halley step, good to ~1e-15 over (0, 1).
double norm_inv_cdf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // one Halley refinement
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace

double sample_truncated_normal(double mean, double std, double lo, double hi, RngStream& rng) {
    if (!(lo < hi)) throw ConfigError("truncated normal requires lo < hi");
    if (!(std > 0.0)) throw ConfigError("truncated normal requires std > 0");
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double v = mean + std * rng.normal();
        if (v >= lo && v <= hi) return v;
    }
    // Inverse-CDF fallback (the interval has tiny mass under the proposal).
    const double cdf_lo = norm_cdf((lo - mean) / std);
    const double cdf_hi = norm_cdf((hi - mean) / std);
    const double u = cdf_lo + (cdf_hi - cdf_lo) * rng.uniform();
    const double v = mean + std * norm_inv_cdf(std::clamp(u, 1e-300, 1.0 - 1e-16));
    return std::clamp(v, lo, hi);
}

double truncated_normal_mean(double mean, double std, double lo, double hi) {
    const double a = (lo - mean) / std;
    const double b = (hi - mean) / std;
    const double z = norm_cdf(b) - norm_cdf(a);
    return mean + std * (norm_pdf(a) - norm_pdf(b)) / z;
}

double truncated_normal_var(double mean, double std, double lo, double hi) {
    const double a = (lo - mean) / std;
    const double b = (hi - mean) / std;
    const double z = norm_cdf(b) - norm_cdf(a);
    const double r = (norm_pdf(a) - norm_pdf(b)) / z;
    return std * std * (1.0 + (a * norm_pdf(a) - b * norm_pdf(b)) / z - r * r);
}

std::array<ChannelDistribution, 5> ExcitationSpec::defaults_for(const ExcitationBounds& b) {
    std::array<ChannelDistribution, 5> out{};
    const auto ranges = b.all();
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        out[i].mean = 0.5 * (ranges[i].lo + ranges[i].hi);
        out[i].std = 0.25 * (ranges[i].hi - ranges[i].lo);
    }
    return out;
}

void ExcitationSpec::validate() const {
    const auto ranges = bounds.all();
    for (const auto& r : ranges) {
        if (!(r.lo < r.hi)) throw ConfigError("excitation bounds require min < max per channel");
    }
    for (const auto& c : channels) {
        if (!(c.std > 0.0)) throw ConfigError("excitation std must be positive");
    }
    if (!(hold_s > 0.0)) throw ConfigError("hold_s must be positive");
    if (!(duration_s >= 0.0)) throw ConfigError("duration_s must be non-negative");
}

ExcitationSequences generate_excitation(const ExcitationSpec& spec) {
    spec.validate();
    RngStream rng(spec.rng_seed);
    const int n = static_cast<int>(spec.duration_s);
    const int hold = std::max(1, static_cast<int>(spec.hold_s));
    const auto ranges = spec.bounds.all();

    ExcitationSequences seq;
    seq.inputs.reserve(n);
    seq.disturbances.reserve(n);
    std::array<double, 5> level{};
    for (int k = 0; k < n; ++k) {
        if (k % hold == 0) {
            for (std::size_t c = 0; c < 5; ++c) {
                level[c] = sample_truncated_normal(spec.channels[c].mean, spec.channels[c].std,
                                                   ranges[c].lo, ranges[c].hi, rng);
            }
        }
        seq.inputs.push_back({level[0], level[1]});
        seq.disturbances.push_back({level[2], level[3], level[4]});
    }
    return seq;
}

Trajectory simulate_trajectory(const PlantState& x0, const ExcitationSequences& seq,
                               const PlantParams& p) {
    if (seq.inputs.size() != seq.disturbances.size()) {
        throw ConfigError("input and disturbance sequences must share a common length");
    }
    if (!p.envelope.contains(x0)) {
        throw TrajectoryDiverged("initial state outside the sanity envelope", 0);
    }
    Trajectory traj;
    const int n = static_cast<int>(seq.inputs.size());
    traj.states.reserve(n + 1);
    traj.inputs.reserve(n);
    traj.disturbances.reserve(n);
    traj.outputs.reserve(n);
    traj.states.push_back(x0);
    for (int k = 0; k < n; ++k) {
        const ControlInput& u = seq.inputs[k];
        const Disturbance& w = seq.disturbances[k];
        traj.outputs.push_back(plant_outputs(traj.states.back(), u, p));
        traj.inputs.push_back(u);
        traj.disturbances.push_back(w);
        try {
            traj.states.push_back(step_plant(traj.states.back(), u, w, traj.dt, p));
        } catch (const TrajectoryDiverged&) {
            throw TrajectoryDiverged("state left the sanity envelope", k);
        }
    }
    return traj;
}

SnapshotDataset assemble_snapshots(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw ConfigError("assemble_snapshots requires at least one trajectory");
    Eigen::Index m = 0;
    for (const auto& t : trajectories) m += t.transitions();
    if (m == 0) throw ConfigError("assemble_snapshots requires a trajectory of length >= 2");

    SnapshotDataset ds;
    ds.X.resize(3, m);
    ds.Xp.resize(3, m);
    ds.U.resize(2, m);
    ds.W.resize(3, m);
    ds.Y.resize(2, m);
    ds.provenance.reserve(m);

    Eigen::Index col = 0;
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
        const Trajectory& t = trajectories[ti];
        for (int k = 0; k < t.transitions(); ++k) {
            ds.X.col(col) = t.states[k].vec();
            ds.Xp.col(col) = t.states[k + 1].vec();
            ds.U(0, col) = t.inputs[k].mdot_fan;
            ds.U(1, col) = t.inputs[k].omega_cmp;
            ds.W(0, col) = t.disturbances[k].t_ac_in;
            ds.W(1, col) = t.disturbances[k].v_veh;
            ds.W(2, col) = t.disturbances[k].omega_blw;
            ds.Y(0, col) = t.outputs[k].p_cmp;
            ds.Y(1, col) = t.outputs[k].p_fan;
            ds.provenance.emplace_back(static_cast<int>(ti), k);
            ++col;
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV store
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kTrajHeader =
    "t_s,p_e_kpa,p_c_kpa,t_cab_c,mdot_fan,omega_cmp,t_ac_in,v_veh,omega_blw,p_cmp_w,p_fan_w";
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << kTrajHeader << "\n";
    const int t_count = static_cast<int>(traj.states.size());
    for (int k = 0; k < t_count; ++k) {
        const auto& x = traj.states[k];
        const int j = std::min(k, traj.transitions() - 1);  // final row repeats held inputs
        const ControlInput u = j >= 0 ? traj.inputs[j] : ControlInput{0.0, 0.0};
        const Disturbance w = j >= 0 ? traj.disturbances[j] : Disturbance{0.0, 0.0, 0.0};
        const PlantOutput y = j >= 0 ? traj.outputs[j] : PlantOutput{0.0, 0.0};
        out << k << ',' << format_double(x.p_e) << ',' << format_double(x.p_c) << ','
            << format_double(x.t_cabin) << ',' << format_double(u.mdot_fan) << ','
            << format_double(u.omega_cmp) << ',' << format_double(w.t_ac_in) << ','
            << format_double(w.v_veh) << ',' << format_double(w.omega_blw) << ','
            << format_double(y.p_cmp) << ',' << format_double(y.p_fan) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory file: " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty trajectory file", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajHeader) throw ParseError("unexpected trajectory header", line_no);

    Trajectory traj;
    std::vector<std::array<double, 11>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<double, 11> row{};
        const char* ptr = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < 11; ++f) {
            auto [next, ec] = std::from_chars(ptr, end, row[f]);
            if (ec != std::errc()) throw ParseError("malformed number", line_no);
            ptr = next;
            if (f < 10) {
                if (ptr >= end || *ptr != ',') throw ParseError("expected 11 columns", line_no);
                ++ptr;
            }
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw ParseError("trajectory has no samples", line_no);

    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        traj.states.push_back({r[1], r[2], r[3]});
        if (k + 1 < rows.size()) {  // last row repeats held values; skip them
            traj.inputs.push_back({r[4], r[5]});
            traj.disturbances.push_back({r[6], r[7], r[8]});
            traj.outputs.push_back({r[9], r[10]});
        }
    }
    return traj;
}

}  // namespace koop
