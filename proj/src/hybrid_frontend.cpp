#include "bsq/hybrid_frontend.hpp"

#include <cmath>

#include "bsq/rng.hpp"

namespace bsq {

void HybridDims::validate(int num_antennas) const {
  if (num_rf < 1 || blocks_up < 1 || num_pilots < 1)
    throw ConfigError("HybridDims: all dimensions must be >= 1");
  if (num_rf > num_antennas)
    throw ConfigError("HybridDims: num_rf must not exceed num_antennas");
}

CMat CombinerSet::composite(int q, int b) const {
  const auto& rf = analog_per_block.at(static_cast<size_t>(b));
  auto it = digital.find({q, b});
  if (it == digital.end()) return rf;
  return rf * it->second;
}

CMat StackedCombiner::wq_tilde(int i) const {
  const CMat& w = wq(i);
  const int M = num_antennas();
  CMat t = CMat::Zero(static_cast<Eigen::Index>(M) * blocks,
                      static_cast<Eigen::Index>(num_rf) * blocks);
  for (int b = 0; b < blocks; ++b)
    t.block(static_cast<Eigen::Index>(b) * M, static_cast<Eigen::Index>(b) * num_rf,
            M, num_rf) = w.middleCols(static_cast<Eigen::Index>(b) * num_rf, num_rf);
  return t;
}

CMat StackedCombiner::grand_dense() const {
  const int M = num_antennas();
  const int P = num_pilots();
  const int cols = cols_per_pilot();
  CMat W = CMat::Zero(static_cast<Eigen::Index>(M) * P,
                      static_cast<Eigen::Index>(cols) * P);
  for (int i = 0; i < P; ++i)
    W.block(static_cast<Eigen::Index>(i) * M, static_cast<Eigen::Index>(i) * cols,
            M, cols) = wq(i);
  return W;
}

CVec StackedCombiner::apply_adjoint(const CVec& h_stacked) const {
  const int M = num_antennas();
  const int P = num_pilots();
  const int cols = cols_per_pilot();
  if (h_stacked.size() != static_cast<Eigen::Index>(M) * P)
    throw ConfigError("StackedCombiner::apply_adjoint: bad input length");
  CVec y(static_cast<Eigen::Index>(cols) * P);
  for (int i = 0; i < P; ++i)
    y.segment(static_cast<Eigen::Index>(i) * cols, cols) =
        wq(i).adjoint() * h_stacked.segment(static_cast<Eigen::Index>(i) * M, M);
  return y;
}

CVec StackedCombiner::apply(const CVec& v) const {
  const int M = num_antennas();
  const int P = num_pilots();
  const int cols = cols_per_pilot();
  if (v.size() != static_cast<Eigen::Index>(cols) * P)
    throw ConfigError("StackedCombiner::apply: bad input length");
  CVec h(static_cast<Eigen::Index>(M) * P);
  for (int i = 0; i < P; ++i)
    h.segment(static_cast<Eigen::Index>(i) * M, M) =
        wq(i) * v.segment(static_cast<Eigen::Index>(i) * cols, cols);
  return h;
}

CombinerSet random_analog_combiner(const HybridDims& dims, int num_antennas,
                                   std::uint64_t seed) {
  dims.validate(num_antennas);
  Rng rng(seed);
  const double mag = 1.0 / std::sqrt(static_cast<double>(num_antennas));
  CombinerSet set;
  set.analog_per_block.reserve(static_cast<size_t>(dims.blocks_up));
  for (int b = 0; b < dims.blocks_up; ++b) {
    CMat w(num_antennas, dims.num_rf);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const double phi = rng.uniform(0.0, kTwoPi);
        w(r, c) = mag * cxd{std::cos(phi), std::sin(phi)};
      }
    set.analog_per_block.push_back(std::move(w));
  }
  return set;
}

StackedCombiner stack_combiners(const CombinerSet& set,
                                const std::vector<int>& pilot_indices) {
  if (set.analog_per_block.empty())
    throw ConfigError("stack_combiners: no analog blocks");
  if (pilot_indices.empty())
    throw ConfigError("stack_combiners: empty pilot set");
  StackedCombiner out;
  out.pilot_indices = pilot_indices;
  out.blocks = static_cast<int>(set.analog_per_block.size());
  out.num_rf = static_cast<int>(set.analog_per_block.front().cols());
  const int M = static_cast<int>(set.analog_per_block.front().rows());
  out.w_per_pilot.reserve(pilot_indices.size());
  for (int q : pilot_indices) {
    CMat w(M, static_cast<Eigen::Index>(out.num_rf) * out.blocks);
    for (int b = 0; b < out.blocks; ++b) {
      CMat composite = set.composite(q, b);
      if (composite.rows() != M || composite.cols() != out.num_rf)
        throw ConfigError("stack_combiners: inconsistent combiner shape");
      w.middleCols(static_cast<Eigen::Index>(b) * out.num_rf, out.num_rf) =
          std::move(composite);
    }
    out.w_per_pilot.push_back(std::move(w));
  }
  return out;
}

CVec stack_channel(const UserChannel& user, const StackedCombiner& stacked,
                   const ArrayConfig& array, const OfdmConfig& ofdm) {
  const int M = array.num_antennas;
  CVec h(static_cast<Eigen::Index>(M) * stacked.num_pilots());
  Eigen::Index row = 0;
  for (int q : stacked.pilot_indices) {
    h.segment(row, M) = channel_at_subcarrier(user, q, array, ofdm);
    row += M;
  }
  return h;
}

CVec simulate_uplink_reception(const UserChannel& user,
                               const StackedCombiner& stacked,
                               const NoiseModel& noise,
                               const ArrayConfig& array, const OfdmConfig& ofdm) {
  if (noise.sigma2 < 0.0) throw ConfigError("NoiseModel: sigma2 must be >= 0");
  const CVec h = stack_channel(user, stacked, array, ofdm);
  CVec y = stacked.apply_adjoint(h);
  if (noise.sigma2 > 0.0) {
    Rng rng(noise.rng_seed);
    const int M = stacked.num_antennas();
    const int cols = stacked.cols_per_pilot();
    // Antenna-domain noise per (pilot, block), pushed through W_{q,b}^H.
    for (int i = 0; i < stacked.num_pilots(); ++i) {
      for (int b = 0; b < stacked.blocks; ++b) {
        CVec n(M);
        for (int m = 0; m < M; ++m) n[m] = rng.cnormal(noise.sigma2);
        const auto wqb = stacked.wq(i).middleCols(
            static_cast<Eigen::Index>(b) * stacked.num_rf, stacked.num_rf);
        y.segment(static_cast<Eigen::Index>(i) * cols +
                      static_cast<Eigen::Index>(b) * stacked.num_rf,
                  stacked.num_rf) += wqb.adjoint() * n;
      }
    }
  }
  return y;
}

CMat noise_covariance_C(const StackedCombiner& stacked) {
  const int n = stacked.meas_dim();
  const int cols = stacked.cols_per_pilot();
  CMat C = CMat::Zero(n, n);
  for (int i = 0; i < stacked.num_pilots(); ++i) {
    // W~_p^H W~_p is itself block-diagonal with blocks W_{p,b}^H W_{p,b}.
    for (int b = 0; b < stacked.blocks; ++b) {
      const auto wqb = stacked.wq(i).middleCols(
          static_cast<Eigen::Index>(b) * stacked.num_rf, stacked.num_rf);
      const Eigen::Index off = static_cast<Eigen::Index>(i) * cols +
                               static_cast<Eigen::Index>(b) * stacked.num_rf;
      C.block(off, off, stacked.num_rf, stacked.num_rf) = wqb.adjoint() * wqb;
    }
  }
  return C;
}

}  // namespace bsq
