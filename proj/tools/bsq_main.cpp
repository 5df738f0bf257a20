#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bsq/channel_model.hpp"
#include "bsq/sim/config_file.hpp"
#include "bsq/sim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& format, long seed_override, int threads_override) {
  bsq::ScenarioConfig cfg = bsq::load_scenario_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) cfg.threads = threads_override;
  const bsq::ResultTable table = bsq::run_scenario(cfg);
  if (format == "csv")
    bsq::emit_csv(table, out_path);
  else
    bsq::emit_json(table, out_path);
  std::cout << "wrote " << table.rows.size() << " rows to " << out_path << "\n";
  return kExitOk;
}

int cmd_squint(int num_antennas, double carrier_hz, double bandwidth_hz,
               double spacing, int num_subcarriers, double level) {
  const bsq::ArrayConfig array{num_antennas, spacing, carrier_hz};
  const bsq::OfdmConfig ofdm{num_subcarriers, bandwidth_hz};
  const auto span = bsq::squint_span_samples(spacing, array, ofdm);  // sin = 1
  std::cout << "sample_period_s        " << ofdm.sample_period_s() << "\n"
            << "subcarrier_spacing_hz  " << ofdm.subcarrier_spacing_hz() << "\n"
            << "max_prop_delay_s       " << span.prop_delay_s << "\n"
            << "max_prop_delay_samples " << span.prop_delay_s / ofdm.sample_period_s()
            << "\n"
            << "max_squint_span_bins   " << span.bins << "\n";
  if (level > 0.0)
    std::cout << "bandwidth_for_level    "
              << bsq::squint_level_to_bandwidth(level, num_antennas, array) << "\n";
  return kExitOk;
}

int cmd_diag(const std::string& config_path, const std::string& out_path) {
  const bsq::ScenarioConfig cfg = bsq::load_scenario_config(config_path);
  bsq::dump_extraction_trace(cfg, out_path);
  std::cout << "wrote extraction trace to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wideband mmWave massive MIMO-OFDM channel estimation "
               "simulator with beam squint"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a Monte Carlo scenario sweep");
  std::string config_path, out_path = "results.csv", format = "csv";
  long seed_override = -1;
  int threads_override = 0;
  run->add_option("--config", config_path, "Scenario config file")->required();
  run->add_option("--out", out_path, "Output path");
  run->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--threads", threads_override, "Override the thread count");

  auto* squint = app.add_subcommand("squint", "Print squint span / bandwidth "
                                              "conversions at sin(theta) = 1");
  int sq_m = 64, sq_nc = 256;
  double sq_fc = 26e9, sq_w = 600e6, sq_spacing = 0.5, sq_level = 0.0;
  squint->add_option("--M", sq_m, "Number of antennas");
  squint->add_option("--fc", sq_fc, "Carrier frequency in Hz");
  squint->add_option("--W", sq_w, "Bandwidth in Hz");
  squint->add_option("--spacing", sq_spacing, "Antenna spacing in wavelengths");
  squint->add_option("--Nc", sq_nc, "Number of subcarriers");
  squint->add_option("--level", sq_level, "Also invert this squint level to a bandwidth");

  auto* diag = app.add_subcommand("diag", "Dump an extraction convergence trace");
  std::string diag_config, diag_out = "trace.csv";
  diag->add_option("--config", diag_config, "Scenario config file")->required();
  diag->add_option("--out", diag_out, "Trace CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, out_path, format, seed_override, threads_override);
    if (squint->parsed())
      return cmd_squint(sq_m, sq_fc, sq_w, sq_spacing, sq_nc, sq_level);
    if (diag->parsed()) return cmd_diag(diag_config, diag_out);
  } catch (const bsq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bsq::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
