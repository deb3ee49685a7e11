#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "oracle_powerflow.hpp"
#include "vvc/feeder.hpp"

using namespace vvc;
using namespace vvc::feeder;

namespace {

const char* kDataDir = VVC_DATA_DIR;

FeederModel four_bus() { return load_feeder(std::string(kDataDir) + "/feeder_4bus.txt"); }

Eigen::VectorXd nominal_p(const FeederModel& f) {
  Eigen::VectorXd p(f.bus_count() - 1);
  for (int i = 1; i < f.bus_count(); ++i) p[i - 1] = f.buses[i].load_p;
  return p;
}

Eigen::VectorXd nominal_q(const FeederModel& f) {
  Eigen::VectorXd q(f.bus_count() - 1);
  for (int i = 1; i < f.bus_count(); ++i) q[i - 1] = f.buses[i].load_q;
  return q;
}

std::string write_temp(const std::string& text) {
  static int counter = 0;
  std::string path = "tmp_feeder_" + std::to_string(counter++) + ".txt";
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("regulator voltage follows the tap position") {
  CHECK(regulator_voltage(0) == doctest::Approx(1.0));
  CHECK(regulator_voltage(10) == doctest::Approx(1.05));
  CHECK(regulator_voltage(-10) == doctest::Approx(0.95));
  CHECK_THROWS_AS(regulator_voltage(11), std::out_of_range);
  CHECK_THROWS_AS(regulator_voltage(-11), std::out_of_range);
}

TEST_CASE("capacitor injection scales with the squared voltage") {
  CHECK(capacitor_injection(1, 200.0, 1.0) == doctest::Approx(200.0));
  CHECK(capacitor_injection(0, 200.0, 1.02) == doctest::Approx(0.0));
  CHECK(capacitor_injection(1, 100.0, 0.95) == doctest::Approx(90.25));
  CHECK_THROWS_AS(capacitor_injection(2, 100.0, 1.0), std::out_of_range);
}

TEST_CASE("oltc turns ratio") {
  CHECK(oltc_ratio(0, 0.005) == doctest::Approx(1.0));
  CHECK(oltc_ratio(5, 0.005) == doctest::Approx(1.025));
  CHECK(oltc_ratio(-10, 0.005) == doctest::Approx(0.95));
}

TEST_CASE("feeder file loads and validates") {
  const auto f = four_bus();
  CHECK(f.bus_count() == 5);
  CHECK(f.branch_count() == 4);
  CHECK(f.device_count() == 3);
  CHECK(f.devices[0].kind == DeviceKind::Regulator);
  CHECK(f.devices[1].kind == DeviceKind::Oltc);
  CHECK(f.devices[2].kind == DeviceKind::Capacitor);
  CHECK(f.nominal_load_p() == doctest::Approx(1300.0));
}

TEST_CASE("loader rejects malformed feeders") {
  SUBCASE("cycle") {
    auto path = write_temp(
        "base 1000 12.47\nbus 0 0 0 0\nbus 1 10 5 0\nbus 2 10 5 0\n"
        "branch 0 1 0.01 0.01 0\nbranch 1 2 0.01 0.01 0\nbranch 2 0 0.01 0.01 0\n");
    CHECK_THROWS(load_feeder(path));
    std::remove(path.c_str());
  }
  SUBCASE("disconnected") {
    auto path = write_temp(
        "base 1000 12.47\nbus 0 0 0 0\nbus 1 10 5 0\nbus 2 10 5 0\nbus 3 10 5 0\n"
        "branch 0 1 0.01 0.01 0\nbranch 2 3 0.01 0.01 0\nbranch 3 2 0.01 0.01 0\n");
    CHECK_THROWS(load_feeder(path));
    std::remove(path.c_str());
  }
  SUBCASE("substation with load") {
    auto path = write_temp(
        "base 1000 12.47\nbus 0 5 0 0\nbus 1 10 5 0\nbranch 0 1 0.01 0.01 0\n");
    CHECK_THROWS(load_feeder(path));
    std::remove(path.c_str());
  }
  SUBCASE("capacitor rating mismatch") {
    auto path = write_temp(
        "base 1000 12.47\nbus 0 0 0 0\nbus 1 10 5 150\nbranch 0 1 0.01 0.01 0\n"
        "device CP1 capacitor 1 0 1 200\n");
    CHECK_THROWS(load_feeder(path));
    std::remove(path.c_str());
  }
}

TEST_CASE("no current flows at zero load") {
  const auto f = four_bus();
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  Eigen::VectorXi taps(3);
  taps << 0, 0, 0;
  const auto sol = solve_power_flow(f, taps, zero, zero);
  CHECK(sol.converged);
  for (int i = 0; i < f.bus_count(); ++i) CHECK(sol.v[i] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.branch_loss_kw.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("no-load voltages are the product of source voltage and oltc ratios") {
  const auto f = four_bus();
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  Eigen::VectorXi taps(3);
  taps << 10, 4, 0;
  const auto sol = solve_power_flow(f, taps, zero, zero);
  const double src = 1.05, a = 1.0 + 4 * 0.005;
  CHECK(sol.v[0] == doctest::Approx(src).epsilon(1e-12));
  CHECK(sol.v[1] == doctest::Approx(src).epsilon(1e-12));
  CHECK(sol.v[2] == doctest::Approx(src).epsilon(1e-12));
  CHECK(sol.v[3] == doctest::Approx(src * a).epsilon(1e-12));
  CHECK(sol.v[4] == doctest::Approx(src * a).epsilon(1e-12));
  CHECK(sol.branch_loss_kw.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("nominal 4-bus flow matches the current-injection oracle") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps(3);

  for (int reg : {-5, 0, 5}) {
    for (int tc : {-4, 0, 4}) {
      for (int cp : {0, 1}) {
        taps << reg, tc, cp;
        const auto sol = solve_power_flow(f, taps, p, q);
        const auto ora = vvc::testing::oracle_solve(f, taps, p, q);
        REQUIRE(sol.converged);
        REQUIRE(ora.converged);
        for (int i = 0; i < f.bus_count(); ++i)
          CHECK(std::abs(sol.v[i] - ora.v[i]) < 1e-6);
        const auto losses = total_and_per_branch_losses(sol);
        CHECK(losses.total_kw == doctest::Approx(ora.branch_loss_kw.sum()).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("power balance holds for converged solutions") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps(3);
  taps << 3, -2, 1;
  const auto sol = solve_power_flow(f, taps, p, q);
  const auto losses = total_and_per_branch_losses(sol);
  double substation_kw = 0.0;
  for (int e = 0; e < f.branch_count(); ++e)
    if (f.branches[e].from == 0) substation_kw += sol.branch_p_kw[e];
  CHECK(std::abs(substation_kw - p.sum() - losses.total_kw) < 1e-6 * f.s_base_kva);
}

TEST_CASE("branch equation residual vanishes at convergence") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps(3);
  taps << -4, 6, 1;
  const auto sol = solve_power_flow(f, taps, p, q);
  for (int e = 0; e < f.branch_count(); ++e) {
    const auto& br = f.branches[e];
    double a = 1.0;
    if (br.oltc_device >= 0) a = oltc_ratio(taps[br.oltc_device], f.devices[br.oltc_device].step);
    const double ps = sol.branch_p_kw[e] / f.s_base_kva;
    const double qs = sol.branch_q_kvar[e] / f.s_base_kva;
    const double lhs = (sol.v[br.to] / a) * (sol.v[br.to] / a);
    const double rhs = sol.v[br.from] * sol.v[br.from] - 2 * (br.r * ps + br.x * qs) +
                       (br.r * br.r + br.x * br.x) * sol.branch_l[e];
    CHECK(std::abs(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("identical inputs give bit-identical solutions") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps(3);
  taps << 2, -1, 1;
  const auto a = solve_power_flow(f, taps, p, q);
  const auto b = solve_power_flow(f, taps, p, q);
  CHECK(a.v == b.v);
  CHECK(a.branch_loss_kw == b.branch_loss_kw);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("raising the regulator tap does not lower the first bus voltage") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  double prev = 0.0;
  for (int tap = -10; tap <= 10; ++tap) {
    Eigen::VectorXi taps(3);
    taps << tap, 0, 0;
    const auto sol = solve_power_flow(f, taps, p, q);
    CHECK(sol.v[1] >= prev);
    prev = sol.v[1];
  }
}

TEST_CASE("tap bounds are enforced") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps(3);
  taps << 0, 11, 0;
  CHECK_THROWS_AS(solve_power_flow(f, taps, p, q), std::out_of_range);
}

TEST_CASE("non-convergence reports the last mismatch") {
  const auto f = four_bus();
  const auto p = nominal_p(f), q = nominal_q(f);
  Eigen::VectorXi taps = Eigen::VectorXi::Zero(3);
  try {
    solve_power_flow(f, taps, p, q, /*tol=*/1e-30, /*max_iter=*/2);
    FAIL("expected PowerFlowError");
  } catch (const PowerFlowError& err) {
    CHECK(err.last_mismatch > 0.0);
  }
}

TEST_CASE("losses require a converged solution") {
  PowerFlowSolution sol;
  sol.converged = false;
  CHECK_THROWS(total_and_per_branch_losses(sol));
}
