#ifndef BSQ_HYBRID_FRONTEND_HPP
#define BSQ_HYBRID_FRONTEND_HPP

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "bsq/channel_model.hpp"
#include "bsq/common.hpp"

namespace bsq {

/// Hybrid front-end dimensions for uplink training.
struct HybridDims {
  int num_rf = 4;     // N_RF
  int blocks_up = 12; // T_up
  int num_pilots = 12;

  void validate(int num_antennas) const;
};

/// Analog combiners per block plus optional per-(q,b) digital combiners.
/// Digital combiners absent from the map are the identity, which is the
/// training default. Every analog entry has modulus 1/sqrt(M).
struct CombinerSet {
  std::vector<CMat> analog_per_block;               // T_up matrices, M x N_RF
  std::map<std::pair<int, int>, CMat> digital;      // (q, b) -> N_RF x N_RF

  /// Composite W_{q,b} = W_RF,b * W_BB,q,b (q 1-based, b 0-based).
  CMat composite(int q, int b) const;
};

/// Per-pilot stacked combiners: W_q = [W_{q,1} ... W_{q,T_up}] plus the
/// block-diagonal aggregates used by the measurement model y = W^H h + n.
/// Blocks are stored; dense aggregates are assembled on demand.
struct StackedCombiner {
  std::vector<int> pilot_indices;  // 1-based, length P
  std::vector<CMat> w_per_pilot;   // per pilot: M x (N_RF * T_up)
  int num_rf = 0;
  int blocks = 0;

  int num_pilots() const { return static_cast<int>(pilot_indices.size()); }
  int num_antennas() const {
    return w_per_pilot.empty() ? 0 : static_cast<int>(w_per_pilot.front().rows());
  }
  /// Measurement dimension N_RF * P * T_up.
  int meas_dim() const { return num_rf * blocks * num_pilots(); }
  int cols_per_pilot() const { return num_rf * blocks; }

  /// W_q for the i-th pilot (0-based position in pilot_indices).
  const CMat& wq(int i) const { return w_per_pilot.at(static_cast<size_t>(i)); }
  /// Block-diagonal W~_q (M T_up x N_RF T_up) for the i-th pilot.
  CMat wq_tilde(int i) const;
  /// Dense grand W (MP x N_RF P T_up), block-diagonal over pilots.
  CMat grand_dense() const;

  /// y = W^H h for h stacked over the pilot set (length M*P).
  CVec apply_adjoint(const CVec& h_stacked) const;
  /// W v for v of length meas_dim(); returns length M*P.
  CVec apply(const CVec& v) const;
};

/// Additive receiver noise: per-element complex Gaussian CN(0, sigma2),
/// drawn deterministically from rng_seed.
struct NoiseModel {
  double sigma2 = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Random phase-shifter training combiners: entries exp(j phi)/sqrt(M) with
/// phi i.i.d. uniform, deterministic given the seed. Digital combiners
/// default to identity.
CombinerSet random_analog_combiner(const HybridDims& dims, int num_antennas,
                                   std::uint64_t seed);

/// Assemble W_q / W~_q / W for the given pilot set.
StackedCombiner stack_combiners(const CombinerSet& set,
                                const std::vector<int>& pilot_indices);

/// One user's stacked pilot reception y = W^H h + n with n the stack of
/// W~_q^H n~_q blocks. Pilot symbols are all 1.
CVec simulate_uplink_reception(const UserChannel& user,
                               const StackedCombiner& stacked,
                               const NoiseModel& noise,
                               const ArrayConfig& array, const OfdmConfig& ofdm);

/// Stack the true channel over the combiner's pilot set (length M*P).
CVec stack_channel(const UserChannel& user, const StackedCombiner& stacked,
                   const ArrayConfig& array, const OfdmConfig& ofdm);

/// Effective noise covariance C_n: block-diagonal with blocks W~_p^H W~_p.
/// E{n n^H} = sigma2 * C_n.
CMat noise_covariance_C(const StackedCombiner& stacked);

}  // namespace bsq

#endif  // BSQ_HYBRID_FRONTEND_HPP
