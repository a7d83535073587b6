#pragma once

// Channel realizations and synthesis of the post-CP-removal time-spatial
// observation grid Y_n (M x N_r) for each OFDM symbol of a frame.

#include <random>
#include <vector>

#include "doaofdm/signal_core.hpp"

namespace doaofdm {

/// Fixed geometry of one propagation path. Angles in radians, delays in seconds.
struct PathGeometry {
  double theta = 0.0;
  double tau = 0.0;
  double power_db = 0.0;

  bool operator==(const PathGeometry&) const = default;
};

/// The four-path reference geometry: DoAs 10/50/-30/20 deg, delays 0/0.9/2.4/3 us,
/// average powers 0/-1/-5/-7 dB.
std::vector<PathGeometry> reference_geometry();

struct ScenarioSpec {
  std::vector<PathGeometry> paths = reference_geometry();
  double v_max_kmh = 300.0;
  double snr_db = 0.0;
  /// When non-empty (one entry per path) these Dopplers replace the cosine-law draw.
  std::vector<double> doppler_hz;

  bool operator==(const ScenarioSpec&) const = default;
};

struct PathParams {
  double theta = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  cplx alpha{1.0, 0.0};
  double avg_power = 1.0;
};

struct ChannelRealization {
  std::vector<PathParams> paths;
  double sigma2 = 0.0;

  /// alpha_p * e^{j2pi nu_p t_n}, the slow-time gain seen by symbol n (1-based).
  cplx gain_at(std::size_t p, int n, const OfdmConfig& cfg) const;
  /// ||alpha||^2 of the realized gains.
  double gain_norm_sq() const;
};

/// Maximum Doppler f_c v_max / c for a speed in km/h.
double doppler_spread(double v_max_kmh, double fc);

/// sigma^2 = ||alpha||^2 P_T / snr. Throws ParameterError for snr <= 0.
double noise_variance_for_snr(std::span<const cplx> alpha, double P_T, double snr);

/// One realization: fixed geometry, gain phases uniform on [0, 2pi) with magnitude
/// sqrt(P_p), Dopplers f_c v_max/c cos(U[0, 2pi)) unless the scenario pins them, and
/// sigma^2 set from the realized gains for the scenario SNR.
ChannelRealization draw_channel(const OfdmConfig& cfg, const ScenarioSpec& scenario,
                                std::mt19937_64& rng);

/// Throws ParameterError when a path delay exceeds the cyclic prefix.
void check_channel_fits(const ChannelRealization& channel, const OfdmConfig& cfg);

/// Y_n = sqrt(P_T) sum_p gain_{p,n} [F^H(x_n .* b(tau_p)) .* c(nu_p)] a(theta_p)^T + N,
/// with vec(N) ~ CN(0, sigma^2 I). No noise is drawn when sigma^2 == 0.
ComplexMat generate_observation(const ComplexVec& x_n, int n, const ChannelRealization& channel,
                                const OfdmConfig& cfg, std::mt19937_64& rng);

/// Received grids of one frame. Carries no channel truth.
struct ObservationFrame {
  std::vector<ComplexMat> Y;  ///< Y[0] is the pilot symbol (n = 1)
  OfdmConfig config;

  int num_symbols() const { return static_cast<int>(Y.size()); }
  const ComplexMat& symbol(int n) const { return Y.at(static_cast<std::size_t>(n - 1)); }
};

struct GeneratedFrame {
  ObservationFrame frame;
  std::vector<ComplexVec> symbols;  ///< transmitted x_n, symbols[0] is the pilot
};

/// Pilot in symbol 1, data symbols mapped from data_bits[0..N-2] in symbols 2..N.
GeneratedFrame generate_frame(const ComplexVec& pilot, const std::vector<Bits>& data_bits,
                              const ChannelRealization& channel, const OfdmConfig& cfg,
                              std::mt19937_64& rng);

Bits random_bits(std::size_t count, std::mt19937_64& rng);

}  // namespace doaofdm
