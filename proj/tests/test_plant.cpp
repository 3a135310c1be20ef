#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "koop/plant.hpp"
#include "support/oracles.hpp"

using namespace koop;

namespace {

const ControlInput kMidInput{0.245, 48.0};
const Disturbance kMidDisturbance{30.0, 40.0, 1.2};

PlantState mid_guess() { return {400.0, 1300.0, 25.0}; }

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("plant") {

TEST_CASE("derivative vanishes at a Newton-located equilibrium") {
    const PlantParams p;
    const PlantState eq = testing::find_equilibrium(mid_guess(), kMidInput, kMidDisturbance, p);
    const Eigen::Vector3d dx = plant_derivative(eq, kMidInput, kMidDisturbance, p);
    CHECK(dx.norm() < 1e-9);
    // the equilibrium itself should sit inside the plausible operating band
    CHECK(eq.p_e > 200.0);
    CHECK(eq.p_e < 600.0);
    CHECK(eq.p_c > 900.0);
    CHECK(eq.p_c < 2000.0);
}

TEST_CASE("cabin heats when the evaporator provides no cooling") {
    const PlantParams p;
    PlantState x = mid_guess();
    x.t_cabin = p.t_evap(x.p_e);  // Qdot_e = 0 by construction
    const Eigen::Vector3d dx = plant_derivative(x, kMidInput, kMidDisturbance, p);
    CHECK(dx[2] > 0.0);
}

TEST_CASE("energy-sign property across the envelope") {
    const PlantParams p;
    RngStream rng(42);
    for (int i = 0; i < 200; ++i) {
        PlantState x{rng.uniform(100.0, 800.0), rng.uniform(500.0, 2800.0),
                     rng.uniform(-5.0, 65.0)};
        const double q_e = (p.u_e0 + p.u_e1 * kMidDisturbance.omega_blw) *
                           (x.t_cabin - p.t_evap(x.p_e));
        if (x.t_cabin > p.t_evap(x.p_e)) {
            CHECK(q_e > 0.0);
            // -Qdot_e reduces the cabin rate: removing it makes the rate larger
            const Eigen::Vector3d dx = plant_derivative(x, kMidInput, kMidDisturbance, p);
            const double rate_without_cooling =
                (p.ua_cab * (kMidDisturbance.t_ac_in - x.t_cabin) + p.q_solar + p.q_gen) / p.d33;
            CHECK(dx[2] < rate_without_cooling);
        }
    }
}

TEST_CASE("non-positive capacitance raises an integration error naming the term") {
    PlantParams p;
    p.delta_e0 = -10.0;
    p.delta_e1 = 0.0;
    try {
        plant_derivative(mid_guess(), kMidInput, kMidDisturbance, p);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.term == "d11");
    }
}

TEST_CASE("fan power follows the cubic map") {
    const PlantParams p;
    PlantState x = mid_guess();
    SUBCASE("zero flow gives zero power") {
        const PlantOutput out = plant_outputs(x, {0.0, 48.0}, p);
        CHECK(out.p_fan == 0.0);
    }
    SUBCASE("max flow gives P_max / eta") {
        const PlantOutput out = plant_outputs(x, {p.mdot_fan_max, 48.0}, p);
        CHECK(out.p_fan == doctest::Approx(p.p_fan_max_w / p.eta_e_fan).epsilon(1e-12));
    }
}

TEST_CASE("compressor power is exactly linear in speed") {
    const PlantParams p;
    const PlantState x = mid_guess();
    const PlantOutput lo = plant_outputs(x, {0.2, 30.0}, p);
    const PlantOutput hi = plant_outputs(x, {0.2, 60.0}, p);
    CHECK(hi.p_cmp / lo.p_cmp == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("compressor power form flag selects the enthalpy difference") {
    PlantParams p;
    const PlantState x = mid_guess();
    const double printed = plant_outputs(x, kMidInput, p).p_cmp;
    p.compressor_power_form = CompressorPowerForm::kIsentropic;
    const double isentropic = plant_outputs(x, kMidInput, p).p_cmp;
    const double mdot = p.mdot_r(x.p_e, kMidInput.omega_cmp);
    const double expected_gap = 1000.0 * mdot * (p.h_g(x.p_e) - p.h_l(x.p_c)) / p.eta_e_cmp;
    CHECK(printed - isentropic == doctest::Approx(expected_gap).epsilon(1e-12));
}

TEST_CASE("outputs are deterministic and state-only") {
    const PlantParams p;
    const PlantState x = mid_guess();
    const PlantOutput a = plant_outputs(x, kMidInput, p);
    const PlantOutput b = plant_outputs(x, kMidInput, p);
    CHECK(a.p_cmp == b.p_cmp);
    CHECK(a.p_fan == b.p_fan);
}

TEST_CASE("one RK4 step on dx/dt = -x matches the hand-evaluated stages") {
    const auto rhs = [](const Eigen::Vector3d& x) -> Eigen::Vector3d { return -x; };
    const Eigen::Vector3d x1 = rk4_step(rhs, Eigen::Vector3d::Ones(), 1.0);
    CHECK(x1[0] == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("stepping from an equilibrium returns the same state") {
    const PlantParams p;
    const PlantState eq = testing::find_equilibrium(mid_guess(), kMidInput, kMidDisturbance, p);
    const PlantState next = step_plant(eq, kMidInput, kMidDisturbance, 1.0, p);
    CHECK(std::abs(next.p_e - eq.p_e) < 1e-9);
    CHECK(std::abs(next.p_c - eq.p_c) < 1e-9);
    CHECK(std::abs(next.t_cabin - eq.t_cabin) < 1e-9);
}

TEST_CASE("1500-step rollout under mid-range constant inputs stays in the envelope") {
    const PlantParams p;
    PlantState x = mid_guess();
    for (int k = 0; k < 1500; ++k) {
        x = step_plant(x, kMidInput, kMidDisturbance, 1.0, p);
    }
    CHECK(p.envelope.contains(x));
}

TEST_CASE("halving the step changes a 100 s trajectory by < 1e-6 relative") {
    const PlantParams p;
    auto rollout = [&](double dt) {
        PlantState x{450.0, 1500.0, 32.0};
        const int steps = static_cast<int>(100.0 / dt);
        for (int k = 0; k < steps; ++k) x = step_plant(x, kMidInput, kMidDisturbance, dt, p);
        return x.vec();
    };
    const Eigen::Vector3d full = rollout(1.0);
    const Eigen::Vector3d half = rollout(0.5);
    CHECK((full - half).norm() / half.norm() < 1e-6);
}

TEST_CASE("integrator shows 4th-order convergence") {
    const PlantParams p;
    auto rollout = [&](double dt) {
        PlantState x{450.0, 1500.0, 32.0};
        const int steps = static_cast<int>(100.0 / dt);
        for (int k = 0; k < steps; ++k) x = step_plant(x, kMidInput, kMidDisturbance, dt, p);
        return x.vec();
    };
    const double err_full = (rollout(1.0) - rollout(0.5)).norm();
    const double err_half = (rollout(0.5) - rollout(0.25)).norm();
    const double ratio = err_full / err_half;
    CHECK(ratio >= 6.4);  // >= 8x within 20%
}

TEST_CASE("envelope violation raises a diverged error") {
    PlantParams p;
    p.envelope.t_cabin_max = 25.0;
    PlantState x{400.0, 1300.0, 24.99};
    ControlInput off{0.01, 13.0};
    Disturbance hot{34.0, 0.0, 0.8};
    CHECK_THROWS_AS(
        [&] {
            for (int k = 0; k < 500; ++k) x = step_plant(x, off, hot, 1.0, p);
        }(),
        TrajectoryDiverged);
}

// --- controller -----------------------------------------------------------

TEST_CASE("controller outputs the bias at zero error") {
    const ControllerGains g;
    const ControlBounds b;
    PlantState x = mid_guess();
    x.t_cabin = 23.0;
    const ControllerStep step = baseline_controller(x, 23.0, g, b, 0.0, 1.0);
    CHECK(step.u.omega_cmp == doctest::Approx(g.bias_hz).epsilon(1e-12));
}

TEST_CASE("large error saturates at the upper bound") {
    const ControllerGains g;
    const ControlBounds b;
    PlantState x = mid_guess();
    x.t_cabin = 60.0;
    const ControllerStep step = baseline_controller(x, 23.0, g, b, 0.0, 1.0);
    CHECK(step.u.omega_cmp == 83.0);
    // anti-windup: integral frozen while saturated
    CHECK(step.integral == 0.0);
}

TEST_CASE("controller output always within bounds") {
    const ControllerGains g;
    const ControlBounds b;
    RngStream rng(7);
    double integral = 0.0;
    for (int i = 0; i < 500; ++i) {
        PlantState x{rng.uniform(60.0, 890.0), rng.uniform(410.0, 2990.0),
                     rng.uniform(-9.0, 69.0)};
        const ControllerStep step = baseline_controller(x, 23.0, g, b, integral, 1.0);
        integral = step.integral;
        CHECK(step.u.omega_cmp >= b.omega_cmp_min);
        CHECK(step.u.omega_cmp <= b.omega_cmp_max);
        CHECK(step.u.mdot_fan >= b.mdot_fan_min);
        CHECK(step.u.mdot_fan <= b.mdot_fan_max);
    }
}

TEST_CASE("closed loop settles from 35 C to 23 C within 650 s") {
    const PlantParams p;
    const ControllerGains g;
    const ControlBounds b;
    const Disturbance w{30.0, 40.0, 1.2};
    PlantState x{400.0, 1200.0, 35.0};
    double integral = 0.0;
    int settled_at = -1;
    for (int k = 0; k < 900; ++k) {
        const ControllerStep step = baseline_controller(x, 23.0, g, b, integral, 1.0);
        integral = step.integral;
        x = step_plant(x, step.u, w, 1.0, p);
        if (std::abs(x.t_cabin - 23.0) <= 0.5) {
            if (settled_at < 0) settled_at = k;
        } else {
            settled_at = -1;  // must stay inside the band
        }
    }
    REQUIRE(settled_at >= 0);
    CHECK(settled_at <= 650);
}

// --- drive cycle ----------------------------------------------------------

TEST_CASE("two-row cycle loads verbatim") {
    const auto path = temp_path("koop_cycle_two_rows.csv");
    std::ofstream(path) << "t_s,v_kmh\n0,0\n1,10\n";
    const auto seq = load_drive_cycle(path.string(), 30.0, 1.2);
    REQUIRE(seq.size() == 2);
    CHECK(seq[0].v_veh == 0.0);
    CHECK(seq[1].v_veh == 10.0);
    CHECK(seq[0].t_ac_in == 30.0);
    CHECK(seq[0].omega_blw == 1.2);
}

TEST_CASE("half-second sampling is resampled to the 1 s grid") {
    const auto path = temp_path("koop_cycle_half_s.csv");
    {
        std::ofstream out(path);
        out << "t_s,v_kmh\n";
        for (int k = 0; k <= 8; ++k) out << 0.5 * k << ',' << k << "\n";  // v = 2 t
    }
    const auto seq = load_drive_cycle(path.string(), 30.0, 1.2);
    REQUIRE(seq.size() == 5);  // length halved + 1
    for (int k = 0; k < 5; ++k) CHECK(seq[k].v_veh == doctest::Approx(2.0 * k).epsilon(1e-12));
}

TEST_CASE("bundled stop-and-go cycle has 651 samples within speed bounds") {
    const std::string path = std::string(KOOP_SOURCE_DIR) + "/data/cycles/stop_and_go_650s.csv";
    const auto seq = load_drive_cycle(path, 30.0, 1.2);
    CHECK(seq.size() == 651);
    double vmax = 0.0;
    for (const auto& w : seq) vmax = std::max(vmax, w.v_veh);
    CHECK(vmax <= 80.0);
}

TEST_CASE("cycle parse errors carry line numbers") {
    SUBCASE("bad header") {
        const auto path = temp_path("koop_cycle_bad_header.csv");
        std::ofstream(path) << "time,speed\n0,0\n";
        try {
            load_drive_cycle(path.string(), 30.0, 1.2);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 1);
        }
    }
    SUBCASE("non-monotone time") {
        const auto path = temp_path("koop_cycle_nonmono.csv");
        std::ofstream(path) << "t_s,v_kmh\n0,0\n2,5\n1,5\n";
        try {
            load_drive_cycle(path.string(), 30.0, 1.2);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 4);
        }
    }
    SUBCASE("negative speed") {
        const auto path = temp_path("koop_cycle_negative.csv");
        std::ofstream(path) << "t_s,v_kmh\n0,0\n1,-3\n";
        try {
            load_drive_cycle(path.string(), 30.0, 1.2);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
        }
    }
}

// --- params config --------------------------------------------------------

TEST_CASE("default params config round-trips and matches the built-in defaults") {
    const std::string path = std::string(KOOP_SOURCE_DIR) + "/configs/plant_default.json";
    const PlantParams loaded = load_plant_params(path);
    const PlantParams builtin;
    CHECK(loaded.delta_e0 == builtin.delta_e0);
    CHECK(loaded.u_c2 == builtin.u_c2);
    CHECK(loaded.eta_e_fan == builtin.eta_e_fan);
    CHECK(plant_params_to_json_text(loaded) == plant_params_to_json_text(builtin));
}

TEST_CASE("unknown plant param keys are rejected") {
    CHECK_THROWS_AS(plant_params_from_json_text(R"({"delta_e0": 1.0, "bogus": 2.0})"),
                    ConfigError);
    CHECK_THROWS_AS(plant_params_from_json_text(R"({"envelope": {"p_e_minimum": 1.0}})"),
                    ConfigError);
}

TEST_CASE("invalid efficiencies are rejected") {
    CHECK_THROWS_AS(plant_params_from_json_text(R"({"eta_e_cmp": 0.0})"), ConfigError);
    CHECK_THROWS_AS(plant_params_from_json_text(R"({"eta_e_cmp": 1.5})"), ConfigError);
    CHECK_THROWS_AS(plant_params_from_json_text(R"({"kappa": 0.0})"), ConfigError);
}

}  // TEST_SUITE
