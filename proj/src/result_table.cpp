#include "bsq/sim/result_table.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "bsq/common.hpp"

namespace bsq {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("emit_csv: cannot open " + path);
  out << "sweep_var,sweep_value,estimator,metric,mean,stderr,trials,seed\n";
  for (const auto& r : table.rows)
    out << r.sweep_var << ',' << format_double(r.sweep_value) << ','
        << r.estimator << ',' << r.metric << ',' << format_double(r.mean) << ','
        << format_double(r.stderr_mean) << ',' << r.trials << ',' << r.seed
        << '\n';
  if (!out) throw ConfigError("emit_csv: write failed for " + path);
}

void emit_json(const ResultTable& table, const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"sweep_var", r.sweep_var},
                    {"sweep_value", r.sweep_value},
                    {"estimator", r.estimator},
                    {"metric", r.metric},
                    {"mean", r.mean},
                    {"stderr", r.stderr_mean},
                    {"trials", r.trials},
                    {"seed", r.seed}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("emit_json: cannot open " + path);
  out << rows.dump(2) << '\n';
  if (!out) throw ConfigError("emit_json: write failed for " + path);
}

}  // namespace bsq
