#pragma once

// Per-path ICI and delay compensation, MRC detection and decision-directed
// Doppler tracking over a sliding window of K symbols.

#include <vector>

#include "doaofdm/channel_sim.hpp"
#include "doaofdm/estimator.hpp"

namespace doaofdm {

/// K = min(floor(1 + 1/(2 sigma_nu T')), N/2); N/2 when sigma_nu == 0.
int window_length(double sigma_nu, double T_prime, int N);

/// y .* c*(nu_hat).
ComplexVec ici_compensate(const ComplexVec& y_pn, double nu_hat, double delta_tau);

/// (F y_ici) .* b*(tau_hat).
ComplexVec delay_compensate(const ComplexVec& y_ici, double tau_hat, double delta_f);

/// sum_p conj(g_p) x_p. Throws ParameterError on an empty list, DimensionError on
/// mismatched lengths.
ComplexVec mrc_combine(std::span<const ComplexVec> x_hat_paths, std::span<const cplx> gains);

/// LS gain with decisions as pilots:
/// [F^H(x_dagger .* b(tau_hat)) .* c(nu_hat)]^H y / (M sqrt(P_T)).
cplx ls_gain_update(const ComplexVec& y_pn, const ComplexVec& x_dagger, double tau_hat,
                    double nu_hat, const OfdmConfig& cfg);

/// angle(alpha_end conj(alpha_start)) / (2 pi (K-1) T'). Throws ParameterError if
/// either gain is zero or K < 2.
double doppler_from_gains(cplx alpha_end, cplx alpha_start, int K, double T_prime);

struct DecodedFrame {
  std::vector<ComplexVec> symbols;  ///< hard decisions for n = 2..N (index 0 is n = 2)
  std::vector<Bits> bits;           ///< bits for n = 2..N
  std::vector<double> nu_hat;       ///< final Doppler per path
  /// nu_hat per window update, [window][path].
  std::vector<std::vector<double>> nu_trajectory;
  /// Gain track per path, [path][n-1], final values after the decode.
  std::vector<std::vector<cplx>> gain_track;
  /// Times a non-finite or zero LS gain was replaced by the prediction.
  int clamped_gains = 0;
  /// Number of times each data symbol was emitted (bookkeeping check), index n-2.
  std::vector<int> emit_count;
};

/// Joint detection and Doppler tracking. Each path needs theta_hat, tau_hat, the pilot
/// gain alpha_hat and an initial nu_hat. Requires K >= 2 and N >= K + 2.
DecodedFrame detect_frame(const ObservationFrame& frame, std::span<const PathEstimate> paths,
                          int K);

/// Compensation and MRC with the true channel (theta, tau, nu and per-symbol gains).
/// Output layout matches detect_frame; no tracking is performed.
DecodedFrame detect_with_known_channel(const ObservationFrame& frame,
                                       const ChannelRealization& channel);

}  // namespace doaofdm
