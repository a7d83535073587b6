#include <cmath>
#include <random>

#include "doctest.h"
#include "doaofdm/errors.hpp"
#include "doaofdm/signal_core.hpp"

using namespace doaofdm;

namespace {
const double kDeg = kPi / 180.0;

ComplexVec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexVec v(n);
  for (int i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return v;
}
}  // namespace

TEST_CASE("OfdmConfig derived quantities") {
  OfdmConfig c;
  CHECK(c.T() == doctest::Approx(1.0 / 30e3));
  CHECK(c.T_prime() == doctest::Approx(38.3333e-6).epsilon(1e-5));
  CHECK(c.delta_tau() * c.M == doctest::Approx(c.T()).epsilon(1e-15));
  CHECK(c.bandwidth() == c.M * c.delta_f);
  CHECK(c.d() == doctest::Approx(c.lambda() / 2));
  CHECK(c.symbol_start(1) == doctest::Approx(c.T_cp));
  CHECK(c.symbol_start(3) == doctest::Approx(3 * c.T_cp + 2 * c.T()));
  CHECK_NOTHROW(c.validate());
  c.M = 1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("dft_matrix small cases and unitarity") {
  const ComplexMat F1 = dft_matrix(1);
  CHECK(std::abs(F1(0, 0) - cplx(1, 0)) < 1e-15);
  const ComplexMat F2 = dft_matrix(2);
  const double s = 1 / std::sqrt(2.0);
  CHECK(std::abs(F2(0, 0) - s) < 1e-15);
  CHECK(std::abs(F2(0, 1) - s) < 1e-15);
  CHECK(std::abs(F2(1, 0) - s) < 1e-15);
  CHECK(std::abs(F2(1, 1) + s) < 1e-15);
  for (int M = 1; M <= 256; M *= 2) {
    const ComplexMat F = dft_matrix(M);
    const double err = (F * F.adjoint() - ComplexMat::Identity(M, M)).norm();
    CHECK(err < (M == 8 ? 1e-12 : 1e-10));
  }
}

TEST_CASE("FFT transforms match the explicit matrix") {
  std::mt19937_64 rng(3);
  for (int M : {1, 2, 7, 64, 128}) {
    const ComplexVec x = random_vec(M, rng);
    const ComplexMat F = dft_matrix(M);
    CHECK((dft(x) - F * x).norm() < 1e-12 * (1 + x.norm()));
    CHECK((idft(x) - F.adjoint() * x).norm() < 1e-12 * (1 + x.norm()));
    CHECK((idft(dft(x)) - x).norm() < 1e-12 * (1 + x.norm()));
  }
}

TEST_CASE("steering vector") {
  const ComplexVec a0 = steering_vector(0.0, 5, 0.5);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(a0[i] - 1.0) < 1e-15);
  const ComplexVec a = steering_vector(30 * kDeg, 4, 0.5);
  const cplx expect[] = {1.0, cplx(0, 1), -1.0, cplx(0, -1)};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - expect[i]) < 1e-12);
  CHECK(std::abs(steering_vector(10 * kDeg, 32, 0.5).squaredNorm() - 32) < 1e-12);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-kPi / 2, kPi / 2);
  for (int t = 0; t < 50; ++t) {
    CHECK(std::abs(steering_vector(u(rng), 17, 0.5).squaredNorm() - 17) < 1e-10);
  }
}

TEST_CASE("delay phasor") {
  for (cplx v : delay_phasor(0.0, 16, 30e3)) CHECK(std::abs(v - 1.0) < 1e-15);
  for (cplx v : delay_phasor(1 / 30e3, 16, 30e3)) CHECK(std::abs(v - 1.0) < 1e-12);
  const ComplexVec b = delay_phasor(0.9e-6, 128, 30e3);
  CHECK(std::arg(b[1]) == doctest::Approx(-2 * kPi * 0.9e-6 * 3e4).epsilon(1e-12));
  CHECK(std::arg(b[1]) == doctest::Approx(-0.16965).epsilon(1e-4));
}

TEST_CASE("doppler phasor") {
  const OfdmConfig c;
  for (cplx v : doppler_phasor(0.0, 16, c.delta_tau())) CHECK(std::abs(v - 1.0) < 1e-15);
  const ComplexVec full = doppler_phasor(c.delta_f, c.M, c.delta_tau());
  for (int q = 0; q < c.M; ++q) {
    CHECK(std::abs(full[q] - std::polar(1.0, 2 * kPi * q / c.M)) < 1e-12);
  }
  const ComplexVec d = doppler_phasor(3e3, c.M, c.delta_tau());
  CHECK(std::arg(d[127]) == doctest::Approx(0.6234).epsilon(1e-3));
}

TEST_CASE("phasor inverses") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> tau(0, 5e-6), nu(-6e3, 6e3);
  const OfdmConfig c;
  for (int t = 0; t < 20; ++t) {
    const ComplexVec b = delay_phasor(tau(rng), c.M, c.delta_f);
    const ComplexVec d = doppler_phasor(nu(rng), c.M, c.delta_tau());
    CHECK((b.cwiseProduct(b.conjugate()) - ComplexVec::Ones(c.M)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((d.cwiseProduct(d.conjugate()) - ComplexVec::Ones(c.M)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("4-QAM labeling, slicing and round trip") {
  const double s = 1 / std::sqrt(2.0);
  const Bits pairs = {0, 0, 0, 1, 1, 0, 1, 1};
  const ComplexVec x = qam_map(pairs);
  CHECK(std::abs(x[0] - cplx(s, s)) < 1e-15);
  CHECK(std::abs(x[1] - cplx(s, -s)) < 1e-15);
  CHECK(std::abs(x[2] - cplx(-s, s)) < 1e-15);
  CHECK(std::abs(x[3] - cplx(-s, -s)) < 1e-15);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(std::abs(x[i]) - 1.0) < 1e-15);

  const Bits odd = {1, 0, 1};
  CHECK_THROWS_AS(qam_map(odd), DimensionError);

  ComplexVec one(1);
  one[0] = cplx(0.3, -0.7);
  CHECK(std::abs(qam_slice(one).symbols[0] - cplx(s, -s)) < 1e-15);
  one[0] = cplx(0.0, -0.0);
  CHECK(std::abs(qam_slice(one).symbols[0] - cplx(s, s)) < 1e-15);

  std::mt19937_64 rng(12);
  Bits bits(256);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
  const ComplexVec mapped = qam_map(bits);
  CHECK(qam_slice(mapped).bits == bits);
  CHECK(qam_slice(mapped * 7.3).bits == bits);
  CHECK((qam_slice(mapped).symbols - mapped).norm() < 1e-14);
  CHECK((qam_decide(mapped * 0.01) - mapped).norm() < 1e-14);
}

TEST_CASE("Q function") {
  CHECK(q_function(0.0) == doctest::Approx(0.5));
  CHECK(q_function(40.0) < 1e-300);
  CHECK(q_function(2.25) == doctest::Approx(0.01222).epsilon(1e-3));
  CHECK(q_function(1.0) > q_function(1.1));
}

TEST_CASE("default pilot is fixed and unit modulus") {
  const ComplexVec p = default_pilot(128);
  CHECK(p.size() == 128);
  for (cplx v : p) CHECK(std::abs(std::abs(v) - 1.0) < 1e-15);
  CHECK((default_pilot(128) - p).norm() == 0.0);
  CHECK(db_to_linear(linear_to_db(3.7)) == doctest::Approx(3.7));
}
