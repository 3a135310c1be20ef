#include "koop/plant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace koop {

namespace {

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw IntegrationError("non-finite term in plant derivative", term);
}

double parse_csv_double(const std::string& field, int line) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError("malformed number '" + field + "'", line);
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

}  // namespace

Eigen::Vector3d plant_derivative(const PlantState& x, const ControlInput& u,
                                 const Disturbance& w, const PlantParams& p) {
    const double d11 = p.d11(x.p_e);
    const double d22 = p.d22(x.p_c);
    if (!(d11 > 0.0)) throw IntegrationError("non-positive capacitance", "d11");
    if (!(d22 > 0.0)) throw IntegrationError("non-positive capacitance", "d22");
    if (!(p.d33 > 0.0)) throw IntegrationError("non-positive capacitance", "d33");

    const double mdot_r = p.mdot_r(x.p_e, u.omega_cmp);
    const double h_g = p.h_g(x.p_e);
    const double h_l = p.h_l(x.p_c);
    const double h_4 = h_l;  // isenthalpic expansion
    const double h_2 = p.h_2(x.p_e, x.p_c);
    check_finite(h_2, "h_2");

    const double q_e = (p.u_e0 + p.u_e1 * w.omega_blw) * (x.t_cabin - p.t_evap(x.p_e));
    const double q_c = (p.u_c0 + p.u_c1 * u.mdot_fan + p.u_c2 * w.v_veh) *
                       (p.t_cond(x.p_c) - w.t_ac_in);
    const double q_in = p.ua_cab * (w.t_ac_in - x.t_cabin) + p.q_solar;

    Eigen::Vector3d dxdt;
    dxdt[0] = (q_e + mdot_r * (h_4 - h_g)) / d11;
    dxdt[1] = (-q_c + mdot_r * (h_2 - h_l)) / d22;
    dxdt[2] = (-q_e + q_in + p.q_gen) / p.d33;
    check_finite(dxdt[0], "dp_e/dt");
    check_finite(dxdt[1], "dp_c/dt");
    check_finite(dxdt[2], "dT_cabin/dt");
    return dxdt;
}

PlantOutput plant_outputs(const PlantState& x, const ControlInput& u, const PlantParams& p) {
    const double mdot_r = p.mdot_r(x.p_e, u.omega_cmp);
    const double h_2 = p.h_2(x.p_e, x.p_c);
    const double dh = p.compressor_power_form == CompressorPowerForm::kAsPrinted
                          ? h_2 - p.h_l(x.p_c)
                          : h_2 - p.h_g(x.p_e);
    const double p_cmp_w = 1000.0 * mdot_r * dh / p.eta_e_cmp;  // kW -> W

    const double omega_fan = p.omega_fan_max * (u.mdot_fan / p.mdot_fan_max);
    const double ratio = omega_fan / p.omega_fan_max;
    const double p_fan_w = (p.p_fan_max_w / p.eta_e_fan) * ratio * ratio * ratio;

    if (p_cmp_w < 0.0 || p_fan_w < 0.0) {
        throw NumericError("negative power computed; state outside the parameter envelope");
    }
    return {p_cmp_w, p_fan_w};
}

PlantState step_plant(const PlantState& x, const ControlInput& u, const Disturbance& w,
                      double dt, const PlantParams& p) {
    if (!(dt > 0.0)) throw ConfigError("step_plant requires dt > 0");
    const auto rhs = [&](const Eigen::Vector3d& s) {
        return plant_derivative(PlantState::from_vec(s), u, w, p);
    };
    const PlantState next = PlantState::from_vec(rk4_step(rhs, x.vec(), dt));
    if (!p.envelope.contains(next)) {
        throw TrajectoryDiverged("state left the sanity envelope", 0);
    }
    return next;
}

ControllerStep baseline_controller(const PlantState& x, double t_ref, const ControllerGains& g,
                                   const ControlBounds& b, double integral, double dt) {
    const double error = x.t_cabin - t_ref;  // positive error -> more cooling
    const double omega_raw = g.bias_hz + g.kp * error + g.ki * integral;
    const bool saturated = omega_raw < b.omega_cmp_min || omega_raw > b.omega_cmp_max;
    const double omega = std::clamp(omega_raw, b.omega_cmp_min, b.omega_cmp_max);

    // fan flow scheduled linearly with compressor speed
    const double frac = (omega - b.omega_cmp_min) / (b.omega_cmp_max - b.omega_cmp_min);
    const double mdot = std::clamp(b.mdot_fan_min + frac * (b.mdot_fan_max - b.mdot_fan_min),
                                   b.mdot_fan_min, b.mdot_fan_max);

    ControllerStep out;
    out.u = {mdot, omega};
    out.integral = saturated ? integral : integral + error * dt;
    return out;
}

std::vector<Disturbance> load_drive_cycle(const std::string& path, double t_ac_in,
                                          double omega_blw) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open drive cycle file: " + path);

    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty drive cycle file", 1);
    ++line_no;
    {
        auto header = split_csv_line(line);
        if (header.size() != 2 || header[0] != "t_s" || header[1] != "v_kmh") {
            throw ParseError("expected header 't_s,v_kmh'", line_no);
        }
    }

    std::vector<double> t, v;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2) throw ParseError("expected 2 columns", line_no);
        const double ti = parse_csv_double(fields[0], line_no);
        const double vi = parse_csv_double(fields[1], line_no);
        if (!t.empty() && ti <= t.back()) throw ParseError("non-monotone time", line_no);
        if (vi < 0.0) throw ParseError("negative speed", line_no);
        t.push_back(ti);
        v.push_back(vi);
    }
    if (t.empty()) throw ParseError("drive cycle has no samples", line_no);

    // Resample onto a 1 s grid by linear interpolation.
    const double t0 = t.front();
    const double t_end = t.back();
    const int n = static_cast<int>(std::floor(t_end - t0 + 1e-9)) + 1;
    std::vector<Disturbance> seq;
    seq.reserve(n);
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        const double tk = t0 + k;
        while (seg + 1 < t.size() && t[seg + 1] < tk) ++seg;
        double vk;
        if (seg + 1 >= t.size()) {
            vk = v.back();
        } else {
            const double a = (tk - t[seg]) / (t[seg + 1] - t[seg]);
            vk = v[seg] + a * (v[seg + 1] - v[seg]);
        }
        seq.push_back({t_ac_in, vk, omega_blw});
    }
    return seq;
}

// ---------------------------------------------------------------------------
// PlantParams JSON
// ---------------------------------------------------------------------------

namespace {
using nlohmann::ordered_json;

struct ParamField {
    const char* key;
    double PlantParams::*member;
};

constexpr ParamField kScalarFields[] = {
    {"delta_e0", &PlantParams::delta_e0}, {"delta_e1", &PlantParams::delta_e1},
    {"delta_c0", &PlantParams::delta_c0}, {"delta_c1", &PlantParams::delta_c1},
    {"d33", &PlantParams::d33},
    {"alpha_e0", &PlantParams::alpha_e0}, {"alpha_e1", &PlantParams::alpha_e1},
    {"alpha_c0", &PlantParams::alpha_c0}, {"alpha_c1", &PlantParams::alpha_c1},
    {"gamma_g0", &PlantParams::gamma_g0}, {"gamma_g1", &PlantParams::gamma_g1},
    {"gamma_l0", &PlantParams::gamma_l0}, {"gamma_l1", &PlantParams::gamma_l1},
    {"c_h", &PlantParams::c_h},           {"kappa", &PlantParams::kappa},
    {"c_v", &PlantParams::c_v},           {"rho_0", &PlantParams::rho_0},
    {"rho_1", &PlantParams::rho_1},
    {"u_e0", &PlantParams::u_e0},         {"u_e1", &PlantParams::u_e1},
    {"u_c0", &PlantParams::u_c0},         {"u_c1", &PlantParams::u_c1},
    {"u_c2", &PlantParams::u_c2},
    {"ua_cab", &PlantParams::ua_cab},     {"q_solar", &PlantParams::q_solar},
    {"q_gen", &PlantParams::q_gen},
    {"eta_e_cmp", &PlantParams::eta_e_cmp}, {"eta_e_fan", &PlantParams::eta_e_fan},
    {"p_fan_max_w", &PlantParams::p_fan_max_w},
    {"omega_fan_max", &PlantParams::omega_fan_max},
    {"mdot_fan_max", &PlantParams::mdot_fan_max},
};

void validate_params(const PlantParams& p) {
    if (!(p.eta_e_cmp > 0.0 && p.eta_e_cmp <= 1.0))
        throw ConfigError("eta_e_cmp must be in (0, 1]");
    if (!(p.eta_e_fan > 0.0 && p.eta_e_fan <= 1.0))
        throw ConfigError("eta_e_fan must be in (0, 1]");
    if (!(p.kappa > 0.0 && p.kappa <= 1.0)) throw ConfigError("kappa must be in (0, 1]");
    if (!(p.d33 > 0.0)) throw ConfigError("d33 must be positive");
    if (!(p.d11(p.envelope.p_e_min) > 0.0 && p.d11(p.envelope.p_e_max) > 0.0))
        throw ConfigError("d11 closure not positive over the envelope");
    if (!(p.d22(p.envelope.p_c_min) > 0.0 && p.d22(p.envelope.p_c_max) > 0.0))
        throw ConfigError("d22 closure not positive over the envelope");
    if (!(p.mdot_fan_max > 0.0)) throw ConfigError("mdot_fan_max must be positive");
    if (!(p.omega_fan_max > 0.0)) throw ConfigError("omega_fan_max must be positive");
}
}  // namespace

PlantParams plant_params_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid plant params JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("plant params JSON must be an object");

    PlantParams p;
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto& f : kScalarFields) {
            if (key == f.key) {
                if (!value.is_number()) throw ConfigError("plant param '" + key + "' must be a number");
                p.*(f.member) = value.get<double>();
                known = true;
                break;
            }
        }
        if (known) continue;
        if (key == "compressor_power_form") {
            const std::string s = value.get<std::string>();
            if (s == "as_printed") {
                p.compressor_power_form = CompressorPowerForm::kAsPrinted;
            } else if (s == "isentropic") {
                p.compressor_power_form = CompressorPowerForm::kIsentropic;
            } else {
                throw ConfigError("compressor_power_form must be 'as_printed' or 'isentropic'");
            }
        } else if (key == "envelope") {
            if (!value.is_object()) throw ConfigError("envelope must be an object");
            for (const auto& [ek, ev] : value.items()) {
                if (ek == "p_e_min") p.envelope.p_e_min = ev.get<double>();
                else if (ek == "p_e_max") p.envelope.p_e_max = ev.get<double>();
                else if (ek == "p_c_min") p.envelope.p_c_min = ev.get<double>();
                else if (ek == "p_c_max") p.envelope.p_c_max = ev.get<double>();
                else if (ek == "t_cabin_min") p.envelope.t_cabin_min = ev.get<double>();
                else if (ek == "t_cabin_max") p.envelope.t_cabin_max = ev.get<double>();
                else throw ConfigError("unknown envelope key '" + ek + "'");
            }
        } else {
            throw ConfigError("unknown plant param key '" + key + "'");
        }
    }
    validate_params(p);
    return p;
}

PlantParams load_plant_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open plant params file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return plant_params_from_json_text(ss.str());
}

std::string plant_params_to_json_text(const PlantParams& p) {
    ordered_json j;
    for (const auto& f : kScalarFields) j[f.key] = p.*(f.member);
    j["compressor_power_form"] =
        p.compressor_power_form == CompressorPowerForm::kAsPrinted ? "as_printed" : "isentropic";
    ordered_json env;
    env["p_e_min"] = p.envelope.p_e_min;
    env["p_e_max"] = p.envelope.p_e_max;
    env["p_c_min"] = p.envelope.p_c_min;
    env["p_c_max"] = p.envelope.p_c_max;
    env["t_cabin_min"] = p.envelope.t_cabin_min;
    env["t_cabin_max"] = p.envelope.t_cabin_max;
    j["envelope"] = env;
    return j.dump(2) + "\n";
}

}  // namespace koop
