#pragma once

// Deterministic signal primitives: unitary DFT, array/delay/Doppler phasors,
// 4-QAM mapping and slicing, Gaussian tail probability.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace doaofdm {

using cplx = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Carrier, grid and array numerology. Defaults are the reference scenario
/// (5.9 GHz carrier, 128 subcarriers at 30 kHz, 5 us CP, 32-element ULA).
struct OfdmConfig {
  double fc = 5.9e9;
  int M = 128;
  int N = 32;
  double delta_f = 30e3;
  double T_cp = 5e-6;
  int N_r = 32;
  double P_T = 1.0;
  int mod_order = 4;

  double T() const { return 1.0 / delta_f; }
  double T_prime() const { return T() + T_cp; }
  double lambda() const { return kSpeedOfLight / fc; }
  /// Element spacing, fixed at half a wavelength.
  double d() const { return lambda() / 2.0; }
  double d_over_lambda() const { return 0.5; }
  double delta_tau() const { return T() / M; }
  double bandwidth() const { return M * delta_f; }
  /// Start time of OFDM symbol n (1-based): n*T_cp + (n-1)*T.
  double symbol_start(int n) const { return n * T_cp + (n - 1) * T(); }
  int bits_per_symbol() const { return 2; }

  /// Throws ParameterError when a field is out of range.
  void validate() const;

  bool operator==(const OfdmConfig&) const = default;
};

/// Explicit unitary DFT matrix, [F]_{m,q} = e^{-j2pi mq/M}/sqrt(M).
ComplexMat dft_matrix(int M);

/// Unitary forward transform F x, computed with an FFT.
ComplexVec dft(const ComplexVec& x);
/// Unitary inverse transform F^H x, computed with an FFT.
ComplexVec idft(const ComplexVec& x);

/// ULA response a(theta), element n = e^{j2pi (d/lambda) n sin(theta)}.
ComplexVec steering_vector(double theta, int N_r, double d_over_lambda);

/// b(tau), element q = e^{-j2pi q tau delta_f}.
ComplexVec delay_phasor(double tau, int M, double delta_f);

/// c(nu), element q = e^{j2pi q nu delta_tau}.
ComplexVec doppler_phasor(double nu, int M, double delta_tau);

/// Gray 4-QAM: bit pair (b0, b1) selects the sign of (re, im); 0 -> +, 1 -> -.
/// Throws DimensionError if the bit count is odd.
ComplexVec qam_map(std::span<const std::uint8_t> bits);

struct SlicedSymbols {
  ComplexVec symbols;
  Bits bits;
};

/// Nearest 4-QAM point by quadrant. A zero component resolves to the positive side.
SlicedSymbols qam_slice(const ComplexVec& symbols);

/// Hard 4-QAM decisions without the bit vector.
ComplexVec qam_decide(const ComplexVec& symbols);

/// Gaussian tail Q(x) = erfc(x/sqrt(2))/2.
double q_function(double x);

/// Fixed pilot for a given subcarrier count. Bits come from raw mt19937_64
/// output so the sequence is identical on every standard library.
ComplexVec default_pilot(int M);

double db_to_linear(double db);
double linear_to_db(double lin);

}  // namespace doaofdm
