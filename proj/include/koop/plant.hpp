#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "koop/util.hpp"

namespace koop {

// ---------------------------------------------------------------------------
// Domain types for the vapor-compression + cabin surrogate.
// States: evaporator pressure p_e [kPa], condenser pressure p_c [kPa],
// cabin air temperature t_cabin [degC].
// ---------------------------------------------------------------------------

struct PlantState {
    double p_e;      // [kPa]
    double p_c;      // [kPa]
    double t_cabin;  // [degC]

    Eigen::Vector3d vec() const { return {p_e, p_c, t_cabin}; }
    static PlantState from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

struct ControlInput {
    double mdot_fan;   // condenser fan air mass flow [kg/s]
    double omega_cmp;  // compressor speed [Hz]
};

struct Disturbance {
    double t_ac_in;    // ambient / condenser inlet air temperature [degC]
    double v_veh;      // vehicle velocity [km/h]
    double omega_blw;  // evaporator blower air velocity [m/s]
};

struct PlantOutput {
    double p_cmp;  // compressor electrical power [W]
    double p_fan;  // fan electrical power [W]
};

enum class CompressorPowerForm {
    kAsPrinted,   // mdot_r * (h_2 - h_l(p_c)) / eta   (condenser-side enthalpy drop)
    kIsentropic,  // mdot_r * (h_2 - h_g(p_e)) / eta   (conventional compression work)
};

/// Hard bounds on the state during integration; leaving them aborts the
/// trajectory instead of silently producing garbage.
struct SanityEnvelope {
    double p_e_min = 50.0, p_e_max = 900.0;
    double p_c_min = 400.0, p_c_max = 3000.0;
    double t_cabin_min = -10.0, t_cabin_max = 70.0;

    bool contains(const PlantState& x) const {
        return x.p_e > p_e_min && x.p_e < p_e_max && x.p_c > p_c_min && x.p_c < p_c_max &&
               x.t_cabin > t_cabin_min && x.t_cabin < t_cabin_max;
    }
};

/// Parametric closures standing in for the refrigerant property tables and
/// heat-exchanger correlations of a high-fidelity model. All affine/power-law,
/// coefficients chosen for an R134a-like envelope (see configs/plant_default.json).
struct PlantParams {
    // heat capacitances: d11(p_e) [kJ/kPa], d22(p_c) [kJ/kPa], d33 [kJ/K]
    double delta_e0 = 0.25, delta_e1 = 0.000625;
    double delta_c0 = 0.15, delta_c1 = 0.000125;
    double d33 = 6.0;
    // saturation temperatures [degC]
    double alpha_e0 = -22.0, alpha_e1 = 0.075;
    double alpha_c0 = 10.0, alpha_c1 = 0.03;
    // saturation enthalpies [kJ/kg]
    double gamma_g0 = 387.0, gamma_g1 = 0.04;   // h_g(p_e)
    double gamma_l0 = 209.0, gamma_l1 = 0.047;  // h_l(p_c)
    // discharge enthalpy h_2 = h_g(p_e) + c_h * ((p_c/p_e)^kappa - 1) [kJ/kg]
    double c_h = 250.0, kappa = 0.1;
    // refrigerant mass flow mdot_r = c_v * omega_cmp * (rho_0 + rho_1 * p_e) [kg/s]
    double c_v = 21.0e-6, rho_0 = 0.15, rho_1 = 0.0485;
    // evaporator heat pickup Qdot_e = (u_e0 + u_e1*omega_blw) * (t_cabin - T_evap(p_e)) [kW]
    double u_e0 = 0.12, u_e1 = 0.10;
    // condenser heat rejection Qdot_c = (u_c0 + u_c1*mdot_fan + u_c2*v_veh) * (T_cond(p_c) - t_ac_in) [kW]
    double u_c0 = 0.08, u_c1 = 0.30, u_c2 = 0.0025;
    // cabin loads [kW]: Qdot_in = ua_cab*(t_ac_in - t_cabin) + q_solar; Qdot_gen constant
    double ua_cab = 0.10, q_solar = 1.5, q_gen = 0.6;
    // electric efficiencies and fan map
    double eta_e_cmp = 0.85, eta_e_fan = 0.80;
    double p_fan_max_w = 350.0;   // shaft power at omega_fan_max [W]
    double omega_fan_max = 300.0; // [rad/s]
    double mdot_fan_max = 0.48;   // [kg/s]; omega_fan = omega_fan_max * mdot_fan / mdot_fan_max
    CompressorPowerForm compressor_power_form = CompressorPowerForm::kAsPrinted;
    SanityEnvelope envelope;

    double d11(double p_e) const { return delta_e0 + delta_e1 * p_e; }
    double d22(double p_c) const { return delta_c0 + delta_c1 * p_c; }
    double t_evap(double p_e) const { return alpha_e0 + alpha_e1 * p_e; }
    double t_cond(double p_c) const { return alpha_c0 + alpha_c1 * p_c; }
    double h_g(double p_e) const { return gamma_g0 + gamma_g1 * p_e; }
    double h_l(double p_c) const { return gamma_l0 + gamma_l1 * p_c; }
    double h_2(double p_e, double p_c) const {
        return h_g(p_e) + c_h * (std::pow(p_c / p_e, kappa) - 1.0);
    }
    double mdot_r(double p_e, double omega_cmp) const {
        return c_v * omega_cmp * (rho_0 + rho_1 * p_e);
    }
};

/// Parses a PlantParams JSON document. Unknown keys are rejected.
PlantParams load_plant_params(const std::string& path);
PlantParams plant_params_from_json_text(const std::string& text);
std::string plant_params_to_json_text(const PlantParams& p);

// ---------------------------------------------------------------------------
// Dynamics and outputs
// ---------------------------------------------------------------------------

/// Right-hand side of the three state balances: [dp_e/dt, dp_c/dt, dT_cabin/dt]
/// in [kPa/s, kPa/s, degC/s]. Throws IntegrationError on non-positive
/// capacitance or a non-finite term.
Eigen::Vector3d plant_derivative(const PlantState& x, const ControlInput& u,
                                 const Disturbance& w, const PlantParams& p);

/// Electrical power draws of compressor and fan [W].
PlantOutput plant_outputs(const PlantState& x, const ControlInput& u, const PlantParams& p);

/// One classical RK4 step of length dt with zero-order-held inputs.
/// Throws TrajectoryDiverged when the result leaves the sanity envelope.
PlantState step_plant(const PlantState& x, const ControlInput& u, const Disturbance& w,
                      double dt, const PlantParams& p);

/// Generic RK4 step used by step_plant; exposed so tests can integrate an
/// arbitrary right-hand side.
template <typename Rhs>
Eigen::Vector3d rk4_step(const Rhs& f, const Eigen::Vector3d& x, double dt) {
    const Eigen::Vector3d k1 = f(x);
    const Eigen::Vector3d k2 = f(x + 0.5 * dt * k1);
    const Eigen::Vector3d k3 = f(x + 0.5 * dt * k2);
    const Eigen::Vector3d k4 = f(x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------
// Baseline temperature-tracking controller (PI with anti-windup)
// ---------------------------------------------------------------------------

struct ControllerGains {
    double kp = 14.0;       // [Hz/K]
    double ki = 0.05;       // [Hz/(K s)]
    double bias_hz = 38.0;  // compressor speed at zero error
};

struct ControlBounds {
    double mdot_fan_min = 0.01, mdot_fan_max = 0.48;
    double omega_cmp_min = 13.0, omega_cmp_max = 83.0;
};

struct ControllerStep {
    ControlInput u;
    double integral;  // updated integral state, to be passed into the next call
};

/// PI law on (t_cabin - t_ref) for compressor speed, fan flow scheduled
/// linearly with compressor speed, both clamped to bounds. The integral is
/// frozen while the speed command saturates.
ControllerStep baseline_controller(const PlantState& x, double t_ref, const ControllerGains& g,
                                   const ControlBounds& b, double integral, double dt);

// ---------------------------------------------------------------------------
// Drive-cycle replay
// ---------------------------------------------------------------------------

/// Reads a velocity profile CSV (header "t_s,v_kmh") and returns the full
/// disturbance sequence on a 1 s grid, resampling by linear interpolation when
/// the file uses a different sampling. t_ac_in and omega_blw are held constant.
std::vector<Disturbance> load_drive_cycle(const std::string& path, double t_ac_in,
                                          double omega_blw);

}  // namespace koop
