#pragma once

// Modified Cramér-Rao bound for per-path Doppler: conditional Fisher information per
// symbol, pilot-only and aggregated over a frame, and the power-weighted bound.

#include <vector>

#include "doaofdm/channel_sim.hpp"

namespace doaofdm {

/// How the inter-path interference and noise floor enter the Fisher information.
///  Unnormalized: P_T |alpha_p|^2 sum_{i != p} |a(theta_p)^T a*(theta_i)|^2 added to sigma^2.
///  ArrayNormalized: post-beamformer view, noise sigma^2 / N_r and interference
///  P_T |alpha_i|^2 |a(theta_p)^T a*(theta_i)|^2 / N_r^2.
enum class IpiModel { Unnormalized, ArrayNormalized };

struct BoundOptions {
  IpiModel ipi = IpiModel::Unnormalized;
  /// Use the average path powers instead of the realized |alpha_p|^2.
  bool use_average_power = false;
};

/// Interference power seen by path p. Throws ParameterError on a bad index.
double ipi_power(std::size_t p, const ChannelRealization& channel, const OfdmConfig& cfg,
                 const BoundOptions& opt = {});

/// Noise plus interference level for path p under the chosen model.
double noise_floor(std::size_t p, const ChannelRealization& channel, const OfdmConfig& cfg,
                   const BoundOptions& opt = {});

/// I_{p,n} = 8 pi^2 |alpha_p|^2 P_T / floor * sum_q (t_n + q dtau)^2 |[F^H(x_n .* b(tau_p))]_q|^2.
/// Throws ParameterError when the floor is zero.
double cfi_symbol(std::size_t p, int n, const ComplexVec& x_n, const ChannelRealization& channel,
                  const OfdmConfig& cfg, const BoundOptions& opt = {});

/// cfi_symbol at n = 1 with the pilot.
double cfi_pilot(std::size_t p, const ComplexVec& x_1, const ChannelRealization& channel,
                 const OfdmConfig& cfg, const BoundOptions& opt = {});

/// ||Theta||^2 = sum_{n=2..N} sum_{q=0..M-1} (t_n + q dtau)^2 via the flat index map.
double theta_norm_sq(const OfdmConfig& cfg);

/// Pilot information plus the data-symbol expectation, both with the average path power.
/// Throws ParameterError when N < 2.
double aggregated_cfi(std::size_t p, const ComplexVec& x_1, const ChannelRealization& channel,
                      const OfdmConfig& cfg, const BoundOptions& opt = {});

struct FimTerms {
  std::vector<double> p_ipi;
  std::vector<double> pilot_cfi;
  std::vector<double> aggregated;
  std::vector<double> mcrlb;  ///< Hz^2 per path
  double weighted = 0.0;      ///< Hz^2
};

/// All per-path terms and sum_p P_p MCRLB_p / sum_p P_p. Throws ParameterError when any
/// aggregated information is zero.
FimTerms fim_terms(const ChannelRealization& channel, const OfdmConfig& cfg,
                   const ComplexVec& x_1, const BoundOptions& opt = {});

double mcrlb_weighted(const ChannelRealization& channel, const OfdmConfig& cfg,
                      const ComplexVec& x_1, const BoundOptions& opt = {});

}  // namespace doaofdm
