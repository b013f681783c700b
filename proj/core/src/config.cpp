#include "pbdw/config.hpp"

#include "pbdw/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pbdw {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: cannot parse number '" + value + "' for key " + key);
  }
}

int parse_int(const std::string& key, const std::string& value) {
  const double x = parse_number(key, value);
  if (x != std::floor(x)) {
    throw ConfigError("config: expected integer for key " + key + ", got " + value);
  }
  return static_cast<int>(x);
}

/// Integer lists accept both "1,2,5" and range shorthand "1..15".
std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const int lo = parse_int(key, item.substr(0, dots));
      const int hi = parse_int(key, item.substr(dots + 2));
      if (hi < lo) throw ConfigError("config: empty range '" + item + "' for key " + key);
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_int(key, item));
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number(key, item));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& value) {
  std::vector<std::uint64_t> out;
  for (int v : parse_int_list(key, value)) {
    if (v < 0) throw ConfigError("config: negative seed for key " + key);
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

BoundaryCondition parse_bc(const std::string& key, const std::string& value) {
  if (value == "dirichlet") return BoundaryCondition::DirichletPerfect;
  if (value == "neumann") return BoundaryCondition::NeumannBiased;
  throw ConfigError("config: key " + key + " expects dirichlet|neumann, got " + value);
}

SourceBias parse_source(const std::string& key, const std::string& value) {
  if (value == "perfect") return SourceBias::PerfectG;
  if (value == "biased") return SourceBias::BiasedZeroG;
  throw ConfigError("config: key " + key + " expects perfect|biased, got " + value);
}

const char* bc_name(BoundaryCondition bc) {
  return bc == BoundaryCondition::DirichletPerfect ? "dirichlet" : "neumann";
}

const char* source_name(SourceBias s) {
  return s == SourceBias::PerfectG ? "perfect" : "biased";
}

const char* strategy_name(SensorStrategy s) {
  return s == SensorStrategy::SGreedy ? "sgreedy" : "random";
}

const char* xi_mode_name(XiMode m) {
  switch (m) {
    case XiMode::Zero: return "zero";
    case XiMode::Fixed: return "fixed";
    case XiMode::Gcv: return "gcv";
  }
  return "zero";
}

const char* model_mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::None: return "none";
    case ModelMode::Weak: return "weak";
    case ModelMode::Strong: return "strong";
  }
  return "none";
}

}  // namespace

void ExperimentConfig::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError("config: mesh must have at least 2x2 nodes");
  if (!(mu_min > 0.0) || !(mu_max >= mu_min)) {
    throw ConfigError("config: parameter range must satisfy 0 < mu_min <= mu_max");
  }
  if (train_count < 1) throw ConfigError("config: train_count must be >= 1");
  if (!(mu_eval > 0.0)) throw ConfigError("config: mu_eval must be positive");
  if (epsilon < 0.0) throw ConfigError("config: epsilon must be nonnegative");
  if (n_list.empty()) throw ConfigError("config: n_list must be nonempty");
  if (m_list.empty() && !m_rule_25n) {
    throw ConfigError("config: m_list must be nonempty (or enable m_rule_25n)");
  }
  if (n_eval < 0) throw ConfigError("config: n_eval must be nonnegative");
  if (!(width > 0.0) || width > 0.25) {
    throw ConfigError("config: sensor width must lie in (0, 0.25]");
  }
  if (delta_list.empty()) throw ConfigError("config: delta_list must be nonempty");
  for (double d : delta_list) {
    if (d < 0.0) throw ConfigError("config: noise levels must be nonnegative");
  }
  if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  if (xi_fixed < 0.0) throw ConfigError("config: xi must be nonnegative");
  for (int n : n_list) {
    if (n < 0) throw ConfigError("config: n_list entries must be nonnegative");
  }
  for (int m : m_list) {
    if (m < 1) throw ConfigError("config: m_list entries must be >= 1");
  }
  if (training_pairs < 0 || epochs < 0) {
    throw ConfigError("config: training_pairs and epochs must be nonnegative");
  }
  if (truth_bc == bk_bc && truth_source == bk_source) {
    // Legal for perfect-model studies; bias studies check the pair again.
  }
}

HelmholtzConfig ExperimentConfig::truth_config() const {
  HelmholtzConfig cfg;
  cfg.mu = mu_eval;
  cfg.epsilon = epsilon;
  cfg.bc = truth_bc;
  cfg.source = truth_source;
  return cfg;
}

HelmholtzConfig ExperimentConfig::bk_config() const {
  HelmholtzConfig cfg;
  cfg.mu = mu_eval;
  cfg.epsilon = epsilon;
  cfg.bc = bk_bc;
  cfg.source = bk_source;
  return cfg;
}

std::vector<double> ExperimentConfig::training_grid() const {
  std::vector<double> grid(static_cast<std::size_t>(train_count));
  if (train_count == 1) {
    grid[0] = 0.5 * (mu_min + mu_max);
    return grid;
  }
  for (int k = 0; k < train_count; ++k) {
    grid[static_cast<std::size_t>(k)] =
        mu_min + (mu_max - mu_min) * k / (train_count - 1);
  }
  return grid;
}

std::vector<double> ExperimentConfig::effective_gcv_grid() const {
  if (!gcv_grid.empty()) return gcv_grid;
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) {
    grid.push_back(std::pow(10.0, -8.0 + 0.5 * k));  // 1e-8 .. 1e2
  }
  return grid;
}

int ExperimentConfig::effective_pairs(ModelMode mode) const {
  if (training_pairs > 0) return training_pairs;
  return mode == ModelMode::Weak ? 501 : 50;
}

int ExperimentConfig::effective_epochs(ModelMode mode) const {
  if (epochs > 0) return epochs;
  return mode == ModelMode::Weak ? 20000 : 5000;
}

int ExperimentConfig::primary_sensor_count() const {
  if (m_rule_25n) return 25 * std::max(n_eval, 1);
  return *std::max_element(m_list.begin(), m_list.end());
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "[mesh]\n"
      << "nx = " << nx << "\nny = " << ny << "\n[parameter]\n"
      << "mu_min = " << format_double(mu_min) << "\nmu_max = " << format_double(mu_max)
      << "\ntrain_count = " << train_count << "\nmu_eval = " << format_double(mu_eval)
      << "\nepsilon = " << format_double(epsilon) << "\n[scenario]\n"
      << "truth_bc = " << bc_name(truth_bc) << "\ntruth_source = " << source_name(truth_source)
      << "\nbk_bc = " << bc_name(bk_bc) << "\nbk_source = " << source_name(bk_source)
      << "\n[background]\nn_list = ";
  for (std::size_t i = 0; i < n_list.size(); ++i) out << (i ? "," : "") << n_list[i];
  out << "\nn_eval = " << n_eval << "\n[sensors]\nm_list = ";
  for (std::size_t i = 0; i < m_list.size(); ++i) out << (i ? "," : "") << m_list[i];
  out << "\nm_rule_25n = " << (m_rule_25n ? 1 : 0)
      << "\nstrategy = " << strategy_name(strategy)
      << "\nwidth = " << format_double(width) << "\nsensor_seed = " << sensor_seed
      << "\n[noise]\ndelta_list = ";
  for (std::size_t i = 0; i < delta_list.size(); ++i) {
    out << (i ? "," : "") << format_double(delta_list[i]);
  }
  out << "\nseeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << "\n[regularization]\nxi_mode = " << xi_mode_name(xi_mode)
      << "\nxi = " << format_double(xi_fixed) << "\ngcv_grid = ";
  for (std::size_t i = 0; i < gcv_grid.size(); ++i) {
    out << (i ? "," : "") << format_double(gcv_grid[i]);
  }
  out << "\n[model]\nmode = " << model_mode_name(model_mode)
      << "\ntraining_pairs = " << training_pairs << "\nepochs = " << epochs
      << "\nlearning_rate = " << format_double(learning_rate)
      << "\nlr_decay = " << format_double(lr_decay)
      << "\nomega1 = " << format_double(omega1) << "\nomega2 = " << format_double(omega2)
      << "\nmodel_seed = " << model_seed << "\ndataset_seed = " << dataset_seed << "\n";
  // Output location and thread count are operational knobs, not part of the
  // experiment identity, so they stay out of the canonical text.
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const { return hash_of_string(canonical_text()); }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_number) +
                          ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;

    if (full == "mesh.nx") cfg.nx = parse_int(full, value);
    else if (full == "mesh.ny") cfg.ny = parse_int(full, value);
    else if (full == "parameter.mu_min") cfg.mu_min = parse_number(full, value);
    else if (full == "parameter.mu_max") cfg.mu_max = parse_number(full, value);
    else if (full == "parameter.train_count") cfg.train_count = parse_int(full, value);
    else if (full == "parameter.mu_eval") cfg.mu_eval = parse_number(full, value);
    else if (full == "parameter.epsilon") cfg.epsilon = parse_number(full, value);
    else if (full == "scenario.truth_bc") cfg.truth_bc = parse_bc(full, value);
    else if (full == "scenario.truth_source") cfg.truth_source = parse_source(full, value);
    else if (full == "scenario.bk_bc") cfg.bk_bc = parse_bc(full, value);
    else if (full == "scenario.bk_source") cfg.bk_source = parse_source(full, value);
    else if (full == "background.n_list") cfg.n_list = parse_int_list(full, value);
    else if (full == "background.n_eval") cfg.n_eval = parse_int(full, value);
    else if (full == "sensors.m_list") cfg.m_list = parse_int_list(full, value);
    else if (full == "sensors.m_rule_25n") cfg.m_rule_25n = parse_int(full, value) != 0;
    else if (full == "sensors.strategy") {
      if (value == "sgreedy") cfg.strategy = SensorStrategy::SGreedy;
      else if (value == "random") cfg.strategy = SensorStrategy::Random;
      else throw ConfigError("config: sensors.strategy expects sgreedy|random");
    }
    else if (full == "sensors.width") cfg.width = parse_number(full, value);
    else if (full == "sensors.seed") cfg.sensor_seed = static_cast<std::uint64_t>(parse_int(full, value));
    else if (full == "noise.delta_list") cfg.delta_list = parse_double_list(full, value);
    else if (full == "noise.seeds") cfg.seeds = parse_seed_list(full, value);
    else if (full == "regularization.xi_mode") {
      if (value == "zero") cfg.xi_mode = XiMode::Zero;
      else if (value == "fixed") cfg.xi_mode = XiMode::Fixed;
      else if (value == "gcv") cfg.xi_mode = XiMode::Gcv;
      else throw ConfigError("config: regularization.xi_mode expects zero|fixed|gcv");
    }
    else if (full == "regularization.xi") cfg.xi_fixed = parse_number(full, value);
    else if (full == "regularization.gcv_grid") cfg.gcv_grid = parse_double_list(full, value);
    else if (full == "model.mode") {
      if (value == "none") cfg.model_mode = ModelMode::None;
      else if (value == "weak") cfg.model_mode = ModelMode::Weak;
      else if (value == "strong") cfg.model_mode = ModelMode::Strong;
      else throw ConfigError("config: model.mode expects none|weak|strong");
    }
    else if (full == "model.training_pairs") cfg.training_pairs = parse_int(full, value);
    else if (full == "model.epochs") cfg.epochs = parse_int(full, value);
    else if (full == "model.learning_rate") cfg.learning_rate = parse_number(full, value);
    else if (full == "model.lr_decay") cfg.lr_decay = parse_number(full, value);
    else if (full == "model.omega1") cfg.omega1 = parse_number(full, value);
    else if (full == "model.omega2") cfg.omega2 = parse_number(full, value);
    else if (full == "model.seed") cfg.model_seed = static_cast<std::uint64_t>(parse_int(full, value));
    else if (full == "model.dataset_seed") cfg.dataset_seed = static_cast<std::uint64_t>(parse_int(full, value));
    else if (full == "output.directory") cfg.output_dir = value;
    else if (full == "output.threads") cfg.threads = parse_int(full, value);
    else throw ConfigError("config: unknown key '" + full + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace pbdw
