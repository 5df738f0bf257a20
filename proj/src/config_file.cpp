#include "bsq/sim/config_file.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bsq {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("config: bad number for " + key + ": '" + value + "'");
  return v;
}

long to_long(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  const long l = static_cast<long>(v);
  if (static_cast<double>(l) != v)
    throw ConfigError("config: expected integer for " + key + ": '" + value + "'");
  return l;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty())
      throw ConfigError("config: empty value for " + key);

    if (key == "system.num_antennas") cfg.num_antennas = static_cast<int>(to_long(key, value));
    else if (key == "system.carrier_hz") cfg.carrier_hz = to_double(key, value);
    else if (key == "system.carrier_dl_hz") cfg.carrier_dl_hz = to_double(key, value);
    else if (key == "system.spacing_dl_wavelengths") cfg.spacing_dl_wavelengths = to_double(key, value);
    else if (key == "system.num_subcarriers") cfg.num_subcarriers = static_cast<int>(to_long(key, value));
    else if (key == "system.bandwidth_hz") cfg.bandwidth_hz = to_double(key, value);
    else if (key == "system.num_rf") cfg.num_rf = static_cast<int>(to_long(key, value));
    else if (key == "system.blocks_up") cfg.blocks_up = static_cast<int>(to_long(key, value));
    else if (key == "system.num_pilots") cfg.num_pilots = static_cast<int>(to_long(key, value));
    else if (key == "system.snr_db") cfg.snr_db = to_double(key, value);
    else if (key == "population.num_users") cfg.population.num_users = static_cast<int>(to_long(key, value));
    else if (key == "population.aoa_min_deg") cfg.population.aoa_min_deg = to_double(key, value);
    else if (key == "population.aoa_max_deg") cfg.population.aoa_max_deg = to_double(key, value);
    else if (key == "population.nlos_min") cfg.population.nlos_min = static_cast<int>(to_long(key, value));
    else if (key == "population.nlos_max") cfg.population.nlos_max = static_cast<int>(to_long(key, value));
    else if (key == "population.delay_min_s") cfg.population.delay_min_s = to_double(key, value);
    else if (key == "population.delay_max_s") cfg.population.delay_max_s = to_double(key, value);
    else if (key == "population.nlos_gain_db") cfg.population.nlos_gain_db = to_double(key, value);
    else if (key == "sweep.variable") cfg.sweep.variable = value;
    else if (key == "sweep.values") {
      cfg.sweep.values.clear();
      for (const auto& item : split_list(value))
        cfg.sweep.values.push_back(to_double(key, item));
    }
    else if (key == "trials") cfg.trials = to_long(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "threads") cfg.threads = static_cast<int>(to_long(key, value));
    else if (key == "estimators") cfg.estimators = split_list(value);
    else if (key == "uplink.guard") cfg.uplink_guard = to_double(key, value);
    else if (key == "uplink.max_group_size") cfg.max_group_size = static_cast<int>(to_long(key, value));
    else if (key == "downlink.enabled") cfg.downlink_enabled = (value == "true" || value == "1");
    else if (key == "downlink.guard") cfg.downlink_guard = to_double(key, value);
    else if (key == "extraction.max_paths") cfg.extraction.max_paths = static_cast<int>(to_long(key, value));
    else if (key == "extraction.lambda0") cfg.extraction.lambda0 = to_double(key, value);
    else if (key == "extraction.lambda_min") cfg.extraction.lambda_min = to_double(key, value);
    else if (key == "extraction.beta_min") cfg.extraction.beta_min = to_double(key, value);
    else if (key == "extraction.gamma_T") cfg.extraction.gamma_T = to_double(key, value);
    else if (key == "extraction.epsilon_min") cfg.extraction.epsilon_min = to_double(key, value);
    else if (key == "extraction.max_iters") cfg.extraction.max_iters = static_cast<int>(to_long(key, value));
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_config(buf.str());
}

}  // namespace bsq
