#include "vvc/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace vvc::cli {

namespace fs = std::filesystem;

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Cmarl: return "cmarl";
    case Algorithm::Sac: return "sac";
    case Algorithm::Admm: return "admm";
  }
  return "?";
}

RawConfig parse_config_text(const std::string& text) {
  RawConfig out;
  std::istringstream in(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    key = trim(key);
    value = trim(value);
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": key outside any [section]");
    const std::string full = section + "." + key;
    if (out.count(full))
      throw std::runtime_error("config: duplicate key " + full);
    out[full] = value;
  }
  return out;
}

RawConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

int default_hidden(Algorithm algo, int bus_count) {
  const int cls = bus_count <= 10 ? 0 : bus_count <= 60 ? 1 : 2;
  switch (algo) {
    case Algorithm::Cmarl: return cls == 0 ? 32 : cls == 1 ? 64 : 128;
    case Algorithm::Sac: return cls == 0 ? 64 : cls == 1 ? 80 : 128;
    case Algorithm::Admm: return cls == 0 ? 32 : 64;
  }
  return 32;
}

double default_alpha(int bus_count) {
  return bus_count <= 10 ? 0.5 : bus_count <= 60 ? 0.2 : 0.1;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "experiment.feeder", "experiment.algorithm", "experiment.output_dir",
    "experiment.horizon_hours", "experiment.history_hours", "experiment.seeds",
    "loads.source", "loads.weeks", "loads.seed", "loads.path",
    "rewards.c_loss", "rewards.c_switch", "rewards.lambda_v", "rewards.v_upper",
    "rewards.v_lower",
    "training.alpha", "training.gamma", "training.lr", "training.hidden", "training.batch",
    "training.rho", "training.update_freq", "training.lambda_consensus",
    "training.reward_scale", "training.replay_capacity", "training.head",
    "training.cap_meter_rule", "training.step_trigger", "training.admm_c",
    "training.admm_rho",
    "graph.edges",
    "failures.schedule", "failures.agent_rate", "failures.link_rate",
    "failures.duration_p", "failures.seed"};

class Reader {
 public:
  Reader(const RawConfig& raw, std::vector<std::string>& errors)
      : raw_(raw), errors_(errors) {}

  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    const auto it = raw_.find(key);
    return it == raw_.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) {
    const auto it = raw_.find(key);
    if (it == raw_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      errors_.push_back(key + ": not a number ('" + it->second + "')");
      return fallback;
    }
  }

  long integer(const std::string& key, long fallback) {
    const double v = num(key, static_cast<double>(fallback));
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v) errors_.push_back(key + ": expected an integer");
    return l;
  }

 private:
  const RawConfig& raw_;
  std::vector<std::string>& errors_;
};

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  const auto joined = fs::path(base_dir) / path;
  if (fs::exists(joined)) return joined.string();
  return path;
}

}  // namespace

LoadedExperiment load_experiment_text(const std::string& text, const std::string& base_dir) {
  LoadedExperiment out;
  auto& errors = out.errors;
  RawConfig raw;
  try {
    raw = parse_config_text(text);
  } catch (const std::exception& err) {
    errors.push_back(err.what());
    return out;
  }
  for (const auto& [key, value] : raw)
    if (!kKnownKeys.count(key)) errors.push_back("unknown config key " + key);

  Reader rd(raw, errors);
  auto& cfg = out.cfg;

  // [experiment]
  cfg.feeder_path = resolve_path(rd.str("experiment.feeder", ""), base_dir);
  if (cfg.feeder_path.empty()) errors.push_back("experiment.feeder: required");
  const std::string algo = rd.str("experiment.algorithm", "cmarl");
  if (algo == "cmarl")
    cfg.algorithm = Algorithm::Cmarl;
  else if (algo == "sac")
    cfg.algorithm = Algorithm::Sac;
  else if (algo == "admm")
    cfg.algorithm = Algorithm::Admm;
  else
    errors.push_back("experiment.algorithm: must be cmarl, sac, or admm (got '" + algo + "')");
  cfg.output_dir = rd.str("experiment.output_dir", "out");
  cfg.horizon_hours = rd.integer("experiment.horizon_hours", 0);
  if (cfg.horizon_hours < 1) errors.push_back("experiment.horizon_hours: must be >= 1");
  cfg.history_hours = rd.integer("experiment.history_hours", 720);
  if (cfg.history_hours < 1) errors.push_back("experiment.history_hours: must be >= 1");
  {
    std::istringstream seeds(rd.str("experiment.seeds", "1"));
    std::string tok;
    while (seeds >> tok) {
      try {
        cfg.seeds.push_back(std::stoull(tok));
      } catch (const std::exception&) {
        errors.push_back("experiment.seeds: bad seed '" + tok + "'");
      }
    }
    if (cfg.seeds.empty()) errors.push_back("experiment.seeds: need at least one seed");
  }

  // [loads]
  cfg.load_source = rd.str("loads.source", "synth");
  cfg.load_weeks = static_cast<int>(rd.integer("loads.weeks", 52));
  cfg.load_seed = static_cast<std::uint64_t>(rd.integer("loads.seed", 1));
  cfg.load_csv_path = resolve_path(rd.str("loads.path", ""), base_dir);
  if (cfg.load_source == "synth") {
    if (cfg.load_weeks < 1) errors.push_back("loads.weeks: must be >= 1");
  } else if (cfg.load_source == "csv") {
    if (cfg.load_csv_path.empty()) errors.push_back("loads.path: required for csv source");
  } else {
    errors.push_back("loads.source: must be synth or csv");
  }

  // [rewards]
  cfg.rewards.c_loss = rd.num("rewards.c_loss", 0.04);
  cfg.rewards.c_switch = rd.num("rewards.c_switch", 0.1);
  cfg.rewards.lambda_v = rd.num("rewards.lambda_v", 2.0 * cfg.rewards.c_loss);
  cfg.rewards.v_upper = rd.num("rewards.v_upper", 1.05);
  cfg.rewards.v_lower = rd.num("rewards.v_lower", 0.95);
  if (cfg.rewards.c_loss < 0) errors.push_back("rewards.c_loss: must be non-negative");
  if (cfg.rewards.c_switch < 0) errors.push_back("rewards.c_switch: must be non-negative");
  if (cfg.rewards.lambda_v < 0) errors.push_back("rewards.lambda_v: must be non-negative");
  if (cfg.rewards.v_lower >= cfg.rewards.v_upper)
    errors.push_back("rewards: v_lower must be below v_upper");

  // Feeder (needed for size-class defaults and graph resolution).
  bool have_feeder = false;
  if (!cfg.feeder_path.empty()) {
    try {
      out.feeder = feeder::load_feeder(cfg.feeder_path);
      have_feeder = true;
    } catch (const std::exception& err) {
      errors.push_back(std::string("experiment.feeder: ") + err.what());
    }
  }
  const int bus_count = have_feeder ? out.feeder.bus_count() : 5;

  // [training]
  auto& h = cfg.hyper;
  h.alpha = rd.num("training.alpha", default_alpha(bus_count));
  h.gamma = rd.num("training.gamma", 0.95);
  h.lr = rd.num("training.lr", 1e-3);
  h.hidden = static_cast<int>(
      rd.integer("training.hidden", default_hidden(cfg.algorithm, bus_count)));
  h.batch = static_cast<int>(rd.integer("training.batch", 16));
  h.rho = rd.num("training.rho", 0.99);
  h.update_freq = static_cast<int>(rd.integer("training.update_freq", 1));
  h.lambda_c = rd.num("training.lambda_consensus", 1.0);
  h.reward_scale = rd.num("training.reward_scale", 5.0);
  h.admm_c = rd.num("training.admm_c", 1.0);
  h.admm_rho = rd.num("training.admm_rho", 500.0);
  if (h.alpha <= 0) errors.push_back("training.alpha: must be positive");
  if (h.gamma < 0 || h.gamma >= 1) errors.push_back("training.gamma: must be in [0, 1)");
  if (h.lr <= 0) errors.push_back("training.lr: must be positive");
  if (h.hidden < 1) errors.push_back("training.hidden: must be >= 1");
  if (h.batch < 1) errors.push_back("training.batch: must be >= 1");
  if (h.rho < 0 || h.rho > 1) errors.push_back("training.rho: must be in [0, 1]");
  if (h.update_freq < 1) errors.push_back("training.update_freq: must be >= 1");

  const std::string head = rd.str("training.head", "ordinal");
  if (head == "ordinal")
    h.head = nn::HeadKind::Ordinal;
  else if (head == "softmax")
    h.head = nn::HeadKind::Softmax;
  else
    errors.push_back("training.head: must be ordinal or softmax");

  const long capacity = rd.integer("training.replay_capacity", 50000);
  if (capacity < 1)
    errors.push_back("training.replay_capacity: must be >= 1");
  else
    cfg.replay_capacity = static_cast<std::size_t>(capacity);

  const std::string rule = rd.str("training.cap_meter_rule", "incident");
  if (rule == "incident")
    cfg.cap_rule = env::CapMeterRule::Incident;
  else if (rule == "twohop")
    cfg.cap_rule = env::CapMeterRule::TwoHop;
  else
    errors.push_back("training.cap_meter_rule: must be incident or twohop");

  const std::string trigger = rd.str("training.step_trigger", "global");
  if (trigger == "global")
    cfg.trigger = consensus::StepTrigger::GlobalCount;
  else if (trigger == "per_agent")
    cfg.trigger = consensus::StepTrigger::PerAgent;
  else
    errors.push_back("training.step_trigger: must be global or per_agent");

  // [graph]
  if (rd.has("graph.edges")) {
    std::istringstream edges(rd.str("graph.edges", ""));
    std::string tok;
    while (edges >> tok) {
      const auto dash = tok.find('-');
      if (dash == std::string::npos) {
        errors.push_back("graph.edges: expected NAME-NAME, got '" + tok + "'");
        continue;
      }
      cfg.edge_names.emplace_back(tok.substr(0, dash), tok.substr(dash + 1));
    }
  } else if (have_feeder) {
    for (int d = 0; d + 1 < out.feeder.device_count(); ++d)
      cfg.edge_names.emplace_back(out.feeder.devices[d].name,
                                  out.feeder.devices[d + 1].name);
  }
  if (have_feeder) {
    const auto device_index = [&](const std::string& name) {
      for (int d = 0; d < out.feeder.device_count(); ++d)
        if (out.feeder.devices[d].name == name) return d;
      return -1;
    };
    for (const auto& [a, b] : cfg.edge_names) {
      const int ia = device_index(a), ib = device_index(b);
      if (ia < 0) errors.push_back("graph.edges: unknown agent '" + a + "'");
      if (ib < 0) errors.push_back("graph.edges: unknown agent '" + b + "'");
      if (ia >= 0 && ib >= 0) out.graph_edges.emplace_back(ia, ib);
    }
    if (errors.empty()) {
      try {
        consensus::CommGraph probe(out.feeder.device_count(), out.graph_edges);
        if (out.feeder.device_count() > 1 && !probe.baseline_connected())
          errors.push_back("graph.edges: communication graph must be connected");
      } catch (const std::exception& err) {
        errors.push_back(std::string("graph.edges: ") + err.what());
      }
    }
  }

  // [failures]
  cfg.failure_schedule_path = resolve_path(rd.str("failures.schedule", ""), base_dir);
  cfg.agent_failure_rate = rd.num("failures.agent_rate", 0.0);
  cfg.link_failure_rate = rd.num("failures.link_rate", 0.0);
  cfg.failure_duration_p = rd.num("failures.duration_p", 0.2);
  cfg.failure_seed = static_cast<std::uint64_t>(rd.integer("failures.seed", 1));
  if (cfg.agent_failure_rate < 0) errors.push_back("failures.agent_rate: must be >= 0");
  if (cfg.link_failure_rate < 0) errors.push_back("failures.link_rate: must be >= 0");
  if (cfg.failure_duration_p <= 0 || cfg.failure_duration_p > 1)
    errors.push_back("failures.duration_p: must be in (0, 1]");
  if (cfg.failures_configured() && cfg.algorithm != Algorithm::Cmarl)
    errors.push_back("failures: failure injection is only supported for cmarl");

  return out;
}

LoadedExperiment load_experiment(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) {
    LoadedExperiment out;
    out.errors.push_back("cannot open config " + config_path);
    return out;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_experiment_text(buf.str(), fs::path(config_path).parent_path().string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "[experiment]\n";
  out << "feeder = " << cfg.feeder_path << '\n';
  out << "algorithm = " << algorithm_name(cfg.algorithm) << '\n';
  out << "output_dir = " << cfg.output_dir << '\n';
  out << "horizon_hours = " << cfg.horizon_hours << '\n';
  out << "history_hours = " << cfg.history_hours << '\n';
  out << "seeds =";
  for (auto s : cfg.seeds) out << ' ' << s;
  out << "\n\n[loads]\n";
  out << "source = " << cfg.load_source << '\n';
  if (cfg.load_source == "csv") {
    out << "path = " << cfg.load_csv_path << '\n';
  } else {
    out << "weeks = " << cfg.load_weeks << '\n';
    out << "seed = " << cfg.load_seed << '\n';
  }
  out << "\n[rewards]\n";
  out << "c_loss = " << cfg.rewards.c_loss << '\n';
  out << "c_switch = " << cfg.rewards.c_switch << '\n';
  out << "lambda_v = " << cfg.rewards.lambda_v << '\n';
  out << "v_upper = " << cfg.rewards.v_upper << '\n';
  out << "v_lower = " << cfg.rewards.v_lower << '\n';
  out << "\n[training]\n";
  const auto& h = cfg.hyper;
  out << "alpha = " << h.alpha << '\n';
  out << "gamma = " << h.gamma << '\n';
  out << "lr = " << h.lr << '\n';
  out << "hidden = " << h.hidden << '\n';
  out << "batch = " << h.batch << '\n';
  out << "rho = " << h.rho << '\n';
  out << "update_freq = " << h.update_freq << '\n';
  out << "lambda_consensus = " << h.lambda_c << '\n';
  out << "reward_scale = " << h.reward_scale << '\n';
  out << "replay_capacity = " << cfg.replay_capacity << '\n';
  out << "head = " << (h.head == nn::HeadKind::Ordinal ? "ordinal" : "softmax") << '\n';
  out << "cap_meter_rule = "
      << (cfg.cap_rule == env::CapMeterRule::Incident ? "incident" : "twohop") << '\n';
  out << "step_trigger = "
      << (cfg.trigger == consensus::StepTrigger::GlobalCount ? "global" : "per_agent") << '\n';
  out << "admm_c = " << h.admm_c << '\n';
  out << "admm_rho = " << h.admm_rho << '\n';
  out << "\n[graph]\n";
  out << "edges =";
  for (const auto& [a, b] : cfg.edge_names) out << ' ' << a << '-' << b;
  out << '\n';
  if (cfg.failures_configured()) {
    out << "\n[failures]\n";
    if (!cfg.failure_schedule_path.empty())
      out << "schedule = " << cfg.failure_schedule_path << '\n';
    if (cfg.agent_failure_rate > 0) out << "agent_rate = " << cfg.agent_failure_rate << '\n';
    if (cfg.link_failure_rate > 0) out << "link_rate = " << cfg.link_failure_rate << '\n';
    out << "duration_p = " << cfg.failure_duration_p << '\n';
    out << "seed = " << cfg.failure_seed << '\n';
  }
  return out.str();
}

}  // namespace vvc::cli
