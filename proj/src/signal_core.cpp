#include "doaofdm/signal_core.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>

#include <fftw3.h>

#include "doaofdm/errors.hpp"

namespace doaofdm {

namespace {

// FFTW plans are created once per (size, direction) and executed through the
// new-array interface, which is thread-safe. Planning itself is not, hence the lock.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<cplx> in(n), out(n);
    fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

ComplexVec unitary_transform(const ComplexVec& x, int sign) {
  const int n = static_cast<int>(x.size());
  if (n < 1) throw DimensionError("transform of an empty vector");
  ComplexVec in = x;
  ComplexVec out(n);
  fftw_execute_dft(plan_cache().get(n, sign), reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  out *= 1.0 / std::sqrt(static_cast<double>(n));
  return out;
}

ComplexVec phase_ramp(double step, int n) {
  ComplexVec v(n);
  for (int q = 0; q < n; ++q) v[q] = std::polar(1.0, step * q);
  return v;
}

}  // namespace

void OfdmConfig::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("OfdmConfig: " + what); };
  if (!(fc > 0)) fail("fc must be positive");
  if (M < 2) fail("M must be >= 2");
  if (N < 4) fail("N must be >= 4");
  if (!(delta_f > 0)) fail("delta_f must be positive");
  if (!(T_cp > 0)) fail("T_cp must be positive");
  if (N_r < 1) fail("N_r must be >= 1");
  if (!(P_T > 0)) fail("P_T must be positive");
  if (mod_order != 4) fail("only 4-QAM is supported");
}

ComplexMat dft_matrix(int M) {
  if (M < 1) throw ParameterError("dft_matrix: M must be >= 1");
  ComplexMat F(M, M);
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  for (int m = 0; m < M; ++m) {
    for (int q = 0; q < M; ++q) {
      // Reduce mq mod M before the trig call to keep the phase exact for large M.
      const long long k = (static_cast<long long>(m) * q) % M;
      F(m, q) = std::polar(scale, -2.0 * kPi * static_cast<double>(k) / M);
    }
  }
  return F;
}

ComplexVec dft(const ComplexVec& x) { return unitary_transform(x, FFTW_FORWARD); }

ComplexVec idft(const ComplexVec& x) { return unitary_transform(x, FFTW_BACKWARD); }

ComplexVec steering_vector(double theta, int N_r, double d_over_lambda) {
  if (N_r < 1) throw ParameterError("steering_vector: N_r must be >= 1");
  return phase_ramp(2.0 * kPi * d_over_lambda * std::sin(theta), N_r);
}

ComplexVec delay_phasor(double tau, int M, double delta_f) {
  return phase_ramp(-2.0 * kPi * tau * delta_f, M);
}

ComplexVec doppler_phasor(double nu, int M, double delta_tau) {
  return phase_ramp(2.0 * kPi * nu * delta_tau, M);
}

ComplexVec qam_map(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) {
    throw DimensionError("qam_map: bit count " + std::to_string(bits.size()) +
                         " is not a multiple of 2");
  }
  const double a = 1.0 / std::sqrt(2.0);
  ComplexVec out(static_cast<Eigen::Index>(bits.size() / 2));
  for (std::size_t i = 0; i < bits.size() / 2; ++i) {
    const double re = bits[2 * i] ? -a : a;
    const double im = bits[2 * i + 1] ? -a : a;
    out[static_cast<Eigen::Index>(i)] = cplx(re, im);
  }
  return out;
}

ComplexVec qam_decide(const ComplexVec& symbols) {
  const double a = 1.0 / std::sqrt(2.0);
  ComplexVec out(symbols.size());
  for (Eigen::Index i = 0; i < symbols.size(); ++i) {
    out[i] = cplx(symbols[i].real() >= 0.0 ? a : -a, symbols[i].imag() >= 0.0 ? a : -a);
  }
  return out;
}

SlicedSymbols qam_slice(const ComplexVec& symbols) {
  SlicedSymbols s{qam_decide(symbols), Bits(2 * static_cast<std::size_t>(symbols.size()))};
  for (Eigen::Index i = 0; i < symbols.size(); ++i) {
    s.bits[2 * i] = s.symbols[i].real() < 0.0 ? 1 : 0;
    s.bits[2 * i + 1] = s.symbols[i].imag() < 0.0 ? 1 : 0;
  }
  return s;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

ComplexVec default_pilot(int M) {
  if (M < 1) throw ParameterError("default_pilot: M must be >= 1");
  std::mt19937_64 gen(0x70696c6f74ULL);
  Bits bits(2 * static_cast<std::size_t>(M));
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i % 64 == 0) word = gen();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return qam_map(bits);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace doaofdm
