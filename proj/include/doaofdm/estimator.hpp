#pragma once

// Pilot-based path estimation: DoA by CFAR on the angular spectrum, then per-path
// delay (correlator argmax) and least-squares gain.

#include <vector>

#include "doaofdm/signal_core.hpp"

namespace doaofdm {

/// Cell-averaging CFAR with a local-maximum requirement.
///
/// The threshold scale is derived from pfa under the model that each cell is the
/// power sum of `looks` independent complex Gaussian samples: the cell-to-training-mean
/// ratio is then F(2 looks, 2 looks n_train) distributed. A positive scale_override
/// bypasses that derivation.
struct CfarConfig {
  int training = 8;  ///< cells per side
  int guard = 2;     ///< cells per side
  double pfa = 1e-3;
  int looks = 1;
  double scale_override = 0.0;

  /// Scale for a window with n_train training cells in total.
  double threshold_scale(int n_train) const;
  void validate() const;

  bool operator==(const CfarConfig&) const = default;
};

/// Search grids and detection post-processing used by estimate_paths.
struct EstimatorConfig {
  CfarConfig cfar;
  double angle_min_deg = -89.0;
  double angle_max_deg = 89.0;
  double angle_step_deg = 0.5;
  /// Delay grid step as a fraction of delta_tau.
  double delay_step_fraction = 0.1;
  /// Peaks weaker than this (dB) relative to the strongest detection are treated as
  /// array sidelobes and dropped. Set to -inf to disable.
  double sidelobe_guard_db = -10.0;

  void validate() const;
  bool operator==(const EstimatorConfig&) const = default;
};

struct PathEstimate {
  double theta_hat = 0.0;
  double tau_hat = 0.0;
  cplx alpha_hat{0.0, 0.0};  ///< gain estimate for the pilot symbol
  double nu_hat = 0.0;       ///< filled in by a Doppler initializer
};

/// Uniform angle grid in radians, endpoints inclusive.
std::vector<double> angle_grid(double min_deg, double max_deg, double step_deg);

/// Uniform delay grid on [0, T_cp] with the configured step.
std::vector<double> delay_grid(const OfdmConfig& cfg, double step_fraction);

/// P(theta) = ||Y_1 a*(theta)||^2 on each grid angle.
std::vector<double> angular_spectrum(const ComplexMat& Y1, std::span<const double> grid,
                                     double d_over_lambda = 0.5);

/// Indices that are local maxima and exceed scale x mean of the training cells
/// (guard band excluded, windows truncated at the edges).
std::vector<std::size_t> cfar_detect(std::span<const double> spectrum, const CfarConfig& cfar);

/// Angle-domain matched filter y = Y a*(theta) / N_r.
ComplexVec angle_mf(const ComplexMat& Y_n, double theta, double d_over_lambda = 0.5);

/// argmax over the grid of |b~(tau)^H y| with b~(tau) = F^H(x_1 .* b(tau)).
/// Ties resolve to the smallest delay.
double estimate_delay(const ComplexVec& y_p1, const ComplexVec& x_1, std::span<const double> grid,
                      double delta_f);

/// LS gain b~(tau)^H y / (M sqrt(P_T)).
cplx estimate_gain(const ComplexVec& y_p1, const ComplexVec& x_1, double tau_hat,
                   const OfdmConfig& cfg);

/// Full pilot-stage estimation. Throws NoPathsDetected when nothing survives detection.
std::vector<PathEstimate> estimate_paths(const ComplexMat& Y1, const ComplexVec& x_1,
                                         const OfdmConfig& cfg, const EstimatorConfig& est);

}  // namespace doaofdm
