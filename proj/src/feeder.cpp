#include "vvc/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace vvc::feeder {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

int FeederModel::bus_index(int external_id) const {
  for (int i = 0; i < bus_count(); ++i)
    if (buses[i].id == external_id) return i;
  fail("unknown bus id " + std::to_string(external_id));
}

double FeederModel::nominal_load_p() const {
  double total = 0.0;
  for (const auto& b : buses) total += b.load_p;
  return total;
}

void FeederModel::finalize() {
  const int n_bus = bus_count();
  if (n_bus < 2) fail("feeder needs at least two buses");
  if (buses[0].id != 0) fail("first bus record must be the substation (id 0)");
  if (buses[0].load_p != 0.0 || buses[0].load_q != 0.0)
    fail("substation must carry zero load");
  for (int i = 0; i < n_bus; ++i) {
    for (int j = i + 1; j < n_bus; ++j)
      if (buses[i].id == buses[j].id)
        fail("duplicate bus id " + std::to_string(buses[i].id));
    if (buses[i].cap_kvar < 0.0) fail("negative capacitor rating");
  }
  if (branch_count() != n_bus - 1)
    fail("branch count must equal bus count - 1 for a radial feeder");
  if (s_base_kva <= 0.0) fail("system base must be positive");

  for (const auto& br : branches) {
    if (br.from < 0 || br.from >= n_bus || br.to < 0 || br.to >= n_bus)
      fail("branch endpoint out of range");
    if (br.r < 0.0) fail("negative branch resistance");
  }

  // Orient branches away from the substation and build the traversal order.
  std::vector<std::vector<int>> incident(n_bus);
  for (int e = 0; e < branch_count(); ++e) {
    incident[branches[e].from].push_back(e);
    incident[branches[e].to].push_back(e);
  }
  parent_branch.assign(n_bus, -1);
  child_branches.assign(n_bus, {});
  topo_order.clear();
  std::vector<bool> visited(n_bus, false);
  std::deque<int> frontier{0};
  visited[0] = true;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    for (int e : incident[u]) {
      auto& br = branches[e];
      const int v = (br.from == u) ? br.to : br.from;
      if (visited[v]) {
        if (parent_branch[u] != e) fail("feeder graph contains a cycle");
        continue;
      }
      if (br.to == u) std::swap(br.from, br.to);
      visited[v] = true;
      parent_branch[v] = e;
      child_branches[u].push_back(e);
      topo_order.push_back(e);
      frontier.push_back(v);
    }
  }
  if (static_cast<int>(topo_order.size()) != branch_count())
    fail("feeder graph is not connected");

  // Device checks and cross-references.
  for (int d = 0; d < device_count(); ++d) {
    auto& dev = devices[d];
    if (dev.tap_min > dev.tap_max) fail("device " + dev.name + ": empty tap range");
    switch (dev.kind) {
      case DeviceKind::Regulator:
        if (dev.bus != 0) fail("regulator must sit at the substation");
        if (dev.tap_min != -10 || dev.tap_max != 10 || dev.step != 0.005)
          fail("regulator must have 21 taps in [-10,10], step 0.005");
        break;
      case DeviceKind::Oltc: {
        if (dev.branch < 0 || dev.branch >= branch_count())
          fail("oltc device " + dev.name + ": bad branch");
        if (dev.tap_min != -10 || dev.tap_max != 10 || dev.step != 0.005)
          fail("oltc must have 21 taps in [-10,10], step 0.005");
        if (branches[dev.branch].oltc_device != d)
          fail("oltc device " + dev.name + " not referenced by its branch");
        break;
      }
      case DeviceKind::Capacitor:
        if (dev.bus < 0 || dev.bus >= n_bus)
          fail("capacitor device " + dev.name + ": bad bus");
        if (dev.tap_min != 0 || dev.tap_max != 1) fail("capacitor taps must be {0,1}");
        if (dev.step <= 0.0) fail("capacitor rating must be positive");
        if (buses[dev.bus].cap_kvar != dev.step)
          fail("capacitor rating mismatch between bus and device record");
        break;
    }
  }
  for (int e = 0; e < branch_count(); ++e) {
    const int d = branches[e].oltc_device;
    if (d >= 0 && (d >= device_count() || devices[d].branch != e))
      fail("branch oltc flag without matching device");
  }
  for (int i = 0; i < n_bus; ++i) {
    if (buses[i].cap_kvar > 0.0) {
      bool found = false;
      for (const auto& dev : devices)
        found |= dev.kind == DeviceKind::Capacitor && dev.bus == i;
      if (!found) fail("bus with capacitor rating but no capacitor device");
    }
  }
}

double regulator_voltage(int tap) {
  if (tap < -10 || tap > 10) throw std::out_of_range("regulator tap out of [-10, 10]");
  return 1.0 + 0.005 * tap;
}

double capacitor_injection(int status, double rating_kvar, double v_pu) {
  if (status != 0 && status != 1) throw std::out_of_range("capacitor status must be 0 or 1");
  if (rating_kvar <= 0.0 || v_pu <= 0.0)
    throw std::invalid_argument("capacitor rating and voltage must be positive");
  return status * rating_kvar * v_pu * v_pu;
}

double oltc_ratio(int tap, double step) { return 1.0 + tap * step; }

namespace {

void check_taps(const FeederModel& feeder, const Eigen::VectorXi& taps) {
  if (taps.size() != feeder.device_count())
    fail("tap vector length does not match device count");
  for (int d = 0; d < feeder.device_count(); ++d) {
    const auto& dev = feeder.devices[d];
    if (taps[d] < dev.tap_min || taps[d] > dev.tap_max)
      throw std::out_of_range("tap out of bounds for device " + dev.name);
  }
}

// Sending-end squared current solving p = p_recv + r*l, q = q_recv + x*l,
// l = (p^2 + q^2) / v_from^2 exactly (quadratic in l, physical root).
double branch_current_sq(double p_recv, double q_recv, double r, double x, double v2_from) {
  const double a = r * r + x * x;
  const double b = 2.0 * (r * p_recv + x * q_recv) - v2_from;
  const double c = p_recv * p_recv + q_recv * q_recv;
  if (a == 0.0) return -c / b;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) throw PowerFlowError("branch flow has no real solution", disc);
  return (-b - std::sqrt(disc)) / (2.0 * a);
}

}  // namespace

PowerFlowSolution solve_power_flow(const FeederModel& feeder, const Eigen::VectorXi& taps,
                                   const Eigen::VectorXd& load_p_kw,
                                   const Eigen::VectorXd& load_q_kvar, double tol,
                                   int max_iter) {
  const int n_bus = feeder.bus_count();
  const int n_br = feeder.branch_count();
  check_taps(feeder, taps);
  if (load_p_kw.size() != n_bus - 1 || load_q_kvar.size() != n_bus - 1)
    fail("load vector length does not match non-substation bus count");

  double v_source = 1.0;
  Eigen::VectorXd ratio = Eigen::VectorXd::Ones(n_br);
  for (int d = 0; d < feeder.device_count(); ++d) {
    const auto& dev = feeder.devices[d];
    if (dev.kind == DeviceKind::Regulator)
      v_source = regulator_voltage(taps[d]);
    else if (dev.kind == DeviceKind::Oltc)
      ratio[dev.branch] = oltc_ratio(taps[d], dev.step);
  }

  // Per-unit net loads; capacitor injection is voltage-dependent and is
  // refreshed from the current iterate each sweep.
  Eigen::VectorXd p_load = Eigen::VectorXd::Zero(n_bus);
  Eigen::VectorXd q_load = Eigen::VectorXd::Zero(n_bus);
  for (int i = 1; i < n_bus; ++i) {
    p_load[i] = load_p_kw[i - 1] / feeder.s_base_kva;
    q_load[i] = load_q_kvar[i - 1] / feeder.s_base_kva;
  }

  Eigen::VectorXd v2 = Eigen::VectorXd::Ones(n_bus);
  {  // No-load starting profile: source voltage through OLTC ratios.
    v2[0] = v_source * v_source;
    for (int e : feeder.topo_order) {
      const auto& br = feeder.branches[e];
      v2[br.to] = v2[br.from] * ratio[e] * ratio[e];
    }
  }

  Eigen::VectorXd r_br(n_br);
  for (int e = 0; e < n_br; ++e) r_br[e] = feeder.branches[e].r;

  Eigen::VectorXd p_send(n_br), q_send(n_br), l_sq(n_br);
  Eigen::VectorXd q_net(n_bus);
  double mismatch = 0.0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    q_net = q_load;
    for (int d = 0; d < feeder.device_count(); ++d) {
      const auto& dev = feeder.devices[d];
      if (dev.kind != DeviceKind::Capacitor || taps[d] == 0) continue;
      q_net[dev.bus] -= capacitor_injection(1, dev.step, std::sqrt(v2[dev.bus])) /
                        feeder.s_base_kva;
    }

    // Backward: aggregate power received at each branch head, close with the
    // sending-end current relation.
    Eigen::VectorXd p_acc = p_load, q_acc = q_net;
    for (auto it = feeder.topo_order.rbegin(); it != feeder.topo_order.rend(); ++it) {
      const int e = *it;
      const auto& br = feeder.branches[e];
      const double l = branch_current_sq(p_acc[br.to], q_acc[br.to], br.r, br.x, v2[br.from]);
      l_sq[e] = l;
      p_send[e] = p_acc[br.to] + br.r * l;
      q_send[e] = q_acc[br.to] + br.x * l;
      p_acc[br.from] += p_send[e];
      q_acc[br.from] += q_send[e];
    }

    // Forward: voltage update with the OLTC ratio applied at the branch tail.
    mismatch = 0.0;
    Eigen::VectorXd v2_new = v2;
    v2_new[0] = v_source * v_source;
    for (int e : feeder.topo_order) {
      const auto& br = feeder.branches[e];
      const double base = v2_new[br.from] - 2.0 * (br.r * p_send[e] + br.x * q_send[e]) +
                          (br.r * br.r + br.x * br.x) * l_sq[e];
      v2_new[br.to] = ratio[e] * ratio[e] * base;
      if (v2_new[br.to] <= 0.0)
        throw PowerFlowError("voltage collapse on branch during forward sweep", v2_new[br.to]);
    }
    const Eigen::VectorXd dv = (v2_new.array().sqrt() - v2.array().sqrt()).abs();
    mismatch = dv.maxCoeff();
    v2 = v2_new;

    if (mismatch < tol) {
      PowerFlowSolution sol;
      sol.v = v2.array().sqrt();
      sol.branch_p_kw = p_send * feeder.s_base_kva;
      sol.branch_q_kvar = q_send * feeder.s_base_kva;
      sol.branch_l = l_sq;
      sol.branch_loss_kw = (l_sq.array() * r_br.array()).matrix() * feeder.s_base_kva;
      sol.converged = true;
      sol.iterations = iter;
      return sol;
    }
  }
  throw PowerFlowError("power flow did not converge after " + std::to_string(max_iter) +
                           " iterations (last mismatch " + std::to_string(mismatch) + ")",
                       mismatch);
}

BranchLosses total_and_per_branch_losses(const PowerFlowSolution& sol) {
  if (!sol.converged) fail("losses requested from a non-converged solution");
  BranchLosses out;
  out.per_branch_kw = sol.branch_loss_kw;
  out.total_kw = sol.branch_loss_kw.sum();
  return out;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) {
    if (t.front() == '#') break;
    toks.push_back(t);
  }
  return toks;
}

}  // namespace

FeederModel load_feeder(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open feeder file " + path);

  FeederModel model;
  struct RawBranch {
    int from_id, to_id;
    double r, x;
    bool oltc;
  };
  std::vector<RawBranch> raw_branches;
  struct RawDevice {
    std::string name, kind;
    std::vector<std::string> args;
  };
  std::vector<RawDevice> raw_devices;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    const auto at = [&](size_t i) -> const std::string& {
      if (i >= toks.size())
        fail(path + ":" + std::to_string(lineno) + ": missing field");
      return toks[i];
    };
    try {
      if (toks[0] == "base") {
        model.s_base_kva = std::stod(at(1));
        model.v_base_kv = std::stod(at(2));
      } else if (toks[0] == "bus") {
        Bus b;
        b.id = std::stoi(at(1));
        b.load_p = std::stod(at(2));
        b.load_q = std::stod(at(3));
        b.cap_kvar = std::stod(at(4));
        model.buses.push_back(b);
      } else if (toks[0] == "branch") {
        raw_branches.push_back({std::stoi(at(1)), std::stoi(at(2)), std::stod(at(3)),
                                std::stod(at(4)), std::stoi(at(5)) != 0});
      } else if (toks[0] == "device") {
        RawDevice d;
        d.name = at(1);
        d.kind = at(2);
        for (size_t i = 3; i < toks.size(); ++i) d.args.push_back(toks[i]);
        raw_devices.push_back(d);
      } else {
        fail(path + ":" + std::to_string(lineno) + ": unknown record '" + toks[0] + "'");
      }
    } catch (const std::invalid_argument&) {
      fail(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }

  for (const auto& rb : raw_branches) {
    Branch br;
    br.from = model.bus_index(rb.from_id);
    br.to = model.bus_index(rb.to_id);
    br.r = rb.r;
    br.x = rb.x;
    model.branches.push_back(br);
  }

  for (const auto& rd : raw_devices) {
    TapDevice dev;
    dev.name = rd.name;
    const auto arg = [&](size_t i) -> const std::string& {
      if (i >= rd.args.size()) fail("device " + rd.name + ": missing field");
      return rd.args[i];
    };
    if (rd.kind == "regulator") {
      dev.kind = DeviceKind::Regulator;
      dev.bus = model.bus_index(std::stoi(arg(0)));
      dev.tap_min = std::stoi(arg(1));
      dev.tap_max = std::stoi(arg(2));
      dev.step = std::stod(arg(3));
    } else if (rd.kind == "oltc") {
      dev.kind = DeviceKind::Oltc;
      const int from = model.bus_index(std::stoi(arg(0)));
      const int to = model.bus_index(std::stoi(arg(1)));
      dev.branch = -1;
      for (int e = 0; e < model.branch_count(); ++e) {
        const auto& br = model.branches[e];
        if ((br.from == from && br.to == to) || (br.from == to && br.to == from))
          dev.branch = e;
      }
      if (dev.branch < 0) fail("oltc device " + dev.name + ": no such branch");
      dev.tap_min = std::stoi(arg(2));
      dev.tap_max = std::stoi(arg(3));
      dev.step = std::stod(arg(4));
    } else if (rd.kind == "capacitor") {
      dev.kind = DeviceKind::Capacitor;
      dev.bus = model.bus_index(std::stoi(arg(0)));
      dev.tap_min = std::stoi(arg(1));
      dev.tap_max = std::stoi(arg(2));
      dev.step = std::stod(arg(3));
    } else {
      fail("device " + rd.name + ": unknown kind '" + rd.kind + "'");
    }
    model.devices.push_back(dev);
  }

  // Wire the branch oltc back-references declared via the flag column.
  for (int d = 0; d < model.device_count(); ++d)
    if (model.devices[d].kind == DeviceKind::Oltc)
      model.branches[model.devices[d].branch].oltc_device = d;
  for (size_t e = 0; e < raw_branches.size(); ++e) {
    const bool has_dev = model.branches[e].oltc_device >= 0;
    if (raw_branches[e].oltc != has_dev)
      fail("branch oltc flag disagrees with device records");
  }

  model.finalize();
  return model;
}

}  // namespace vvc::feeder
