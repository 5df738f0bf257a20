#ifndef BSQ_SIM_RESULT_TABLE_HPP
#define BSQ_SIM_RESULT_TABLE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace bsq {

/// One aggregated metric at one sweep point.
struct ResultRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string estimator;
  std::string metric;
  double mean = 0.0;
  double stderr_mean = 0.0;
  long trials = 0;
  std::uint64_t seed = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

/// CSV with exactly the columns
/// sweep_var,sweep_value,estimator,metric,mean,stderr,trials,seed
/// in deterministic row order.
void emit_csv(const ResultTable& table, const std::string& path);

/// Same content as a JSON array of row objects.
void emit_json(const ResultTable& table, const std::string& path);

}  // namespace bsq

#endif  // BSQ_SIM_RESULT_TABLE_HPP
