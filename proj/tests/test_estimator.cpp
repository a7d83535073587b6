#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "doaofdm/channel_sim.hpp"
#include "doaofdm/errors.hpp"
#include "doaofdm/estimator.hpp"

using namespace doaofdm;

namespace {
const double kDeg = kPi / 180.0;

ChannelRealization table_channel(double nu = 0.0) {
  ChannelRealization ch;
  for (const auto& g : reference_geometry()) {
    const double P = db_to_linear(g.power_db);
    ch.paths.push_back({g.theta, g.tau, nu, std::polar(std::sqrt(P), 0.7 * g.power_db + 0.2), P});
  }
  return ch;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] >= s[i - 1] && s[i] > s[i + 1]) out.push_back(i);
  }
  return out;
}
}  // namespace

TEST_CASE("angular spectrum") {
  OfdmConfig cfg;
  std::mt19937_64 rng(1);
  const ComplexVec x = default_pilot(cfg.M);
  const auto grid = angle_grid(-89, 89, 0.5);
  ChannelRealization one;
  one.paths = {{10 * kDeg, 0.0, 0.0, 1.0, 1.0}};
  const auto s1 = angular_spectrum(generate_observation(x, 1, one, cfg, rng), grid);
  const auto peak = std::max_element(s1.begin(), s1.end()) - s1.begin();
  CHECK(grid[static_cast<std::size_t>(peak)] == doctest::Approx(10 * kDeg));
  for (double v : s1) CHECK(v >= 0.0);

  for (double v : angular_spectrum(ComplexMat::Zero(cfg.M, cfg.N_r), grid)) CHECK(v == 0.0);

  // Every true DoA has a local maximum within one grid step (fine-grid scan).
  const auto fine = angle_grid(-89, 89, 0.1);
  const auto sT = angular_spectrum(generate_observation(x, 1, table_channel(), cfg, rng), fine);
  const auto maxima = local_maxima(sT);
  for (double deg : {10.0, 50.0, -30.0, 20.0}) {
    const bool found = std::any_of(maxima.begin(), maxima.end(), [&](std::size_t i) {
      return std::abs(fine[i] - deg * kDeg) <= 0.1 * kDeg + 1e-12;
    });
    CHECK_MESSAGE(found, "no local maximum near " << deg);
  }
}

TEST_CASE("CFAR detector basics") {
  CfarConfig cfar;
  std::vector<double> flat(100, 3.0);
  CHECK(cfar_detect(flat, cfar).empty());

  std::vector<double> spike(100, 1.0);
  spike[40] = 100.0;
  const auto hits = cfar_detect(spike, cfar);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == 40);

  std::vector<double> edge(100, 1.0);
  edge[1] = 100.0;  // truncated training window on the left
  CHECK(cfar_detect(edge, cfar) == std::vector<std::size_t>{1});

  std::vector<double> tiny(21, 1.0);
  CHECK_THROWS_AS(cfar_detect(tiny, cfar), DimensionError);

  CfarConfig bad;
  bad.training = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  CfarConfig fixed;
  fixed.scale_override = 4.0;
  CHECK(fixed.threshold_scale(16) == 4.0);
}

TEST_CASE("CFAR false-alarm calibration on independent cells") {
  for (int looks : {1, 8}) {
    CfarConfig cfar;
    cfar.looks = looks;
    cfar.pfa = 1e-3;
    std::mt19937_64 rng(100 + looks);
    std::gamma_distribution<double> cell(looks, 1.0);
    std::size_t alarms = 0, cells = 0;
    const int len = 1000;
    std::vector<double> s(len);
    for (int rep = 0; rep < 200; ++rep) {
      for (auto& v : s) v = cell(rng);
      alarms += cfar_detect(s, cfar).size();
      cells += len - 2 * (cfar.training + cfar.guard);
    }
    const double rate = double(alarms) / double(cells);
    CHECK_MESSAGE(rate > cfar.pfa / 2, "looks " << looks << " rate " << rate);
    CHECK_MESSAGE(rate < cfar.pfa * 2, "looks " << looks << " rate " << rate);
  }
}

TEST_CASE("CFAR on noise-only angular spectra stays under twice the target") {
  OfdmConfig cfg;
  cfg.M = 32;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CfarConfig cfar;
  cfar.looks = cfg.M;
  const auto grid = angle_grid(-89, 89, 0.5);
  std::size_t alarms = 0, cells = 0;
  for (int rep = 0; rep < 300; ++rep) {
    ComplexMat Y(cfg.M, cfg.N_r);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = cplx(g(rng), g(rng));
    alarms += cfar_detect(angular_spectrum(Y, grid), cfar).size();
    cells += grid.size();
  }
  CHECK(double(alarms) / double(cells) < 2 * cfar.pfa);
}

TEST_CASE("angle matched filter") {
  OfdmConfig cfg;
  cfg.M = 16;
  std::mt19937_64 rng(2);
  const ComplexVec x = default_pilot(cfg.M);
  ChannelRealization one;
  one.paths = {{0.35, 1.2e-6, 700.0, std::polar(0.6, 0.9), 0.36}};
  const int n = 3;
  const ComplexVec y = angle_mf(generate_observation(x, n, one, cfg, rng), 0.35);
  const ComplexVec expect =
      std::sqrt(cfg.P_T) * one.gain_at(0, n, cfg) *
      idft(x.cwiseProduct(delay_phasor(1.2e-6, cfg.M, cfg.delta_f)))
          .cwiseProduct(doppler_phasor(700.0, cfg.M, cfg.delta_tau()));
  CHECK((y - expect).norm() < 1e-12);

  OfdmConfig two = cfg;
  two.N_r = 2;
  ChannelRealization other;
  other.paths = {{-30 * kDeg, 0.0, 0.0, 1.0, 1.0}};
  CHECK(angle_mf(generate_observation(x, 1, other, two, rng), 30 * kDeg).norm() < 1e-12);

  OfdmConfig noise_cfg;
  noise_cfg.M = 8;
  ChannelRealization silent;
  silent.paths = {{0.0, 0.0, 0.0, 0.0, 0.0}};
  silent.sigma2 = 1.0;
  double acc = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    acc += angle_mf(generate_observation(x.head(8), 1, silent, noise_cfg, rng), 0.2)
               .squaredNorm() / noise_cfg.M;
  }
  CHECK(acc / trials == doctest::Approx(1.0 / 32).epsilon(0.05));
}

TEST_CASE("delay estimation") {
  OfdmConfig cfg;
  std::mt19937_64 rng(3);
  const ComplexVec x = default_pilot(cfg.M);
  const auto grid = delay_grid(cfg, 0.1);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() <= cfg.T_cp);
  CHECK(grid.back() > cfg.T_cp - cfg.delta_tau() * 0.1);
  auto branch = [&](double tau) {
    return idft(x.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f))).eval();
  };
  CHECK(estimate_delay(branch(grid[57]), x, grid, cfg.delta_f) == grid[57]);
  const double step = grid[1] - grid[0];
  CHECK(std::abs(estimate_delay(branch(0.9e-6), x, grid, cfg.delta_f) - 0.9e-6) <= step / 2);

  std::normal_distribution<double> g;
  ComplexVec noise(cfg.M);
  for (auto& v : noise) v = cplx(g(rng), g(rng));
  const double t = estimate_delay(noise, x, grid, cfg.delta_f);
  CHECK(t >= 0.0);
  CHECK(t <= cfg.T_cp);

  // Ties resolve toward the smallest delay.
  CHECK(estimate_delay(ComplexVec::Zero(cfg.M), x, grid, cfg.delta_f) == 0.0);
}

TEST_CASE("LS gain") {
  OfdmConfig cfg;
  const ComplexVec x = default_pilot(cfg.M);
  const cplx alpha = std::polar(0.7, kPi / 3);
  const double tau = 1.3e-6;
  const ComplexVec y =
      std::sqrt(cfg.P_T) * alpha * idft(x.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f)));
  CHECK(std::abs(estimate_gain(y, x, tau, cfg) - alpha) < 1e-12);

  const ComplexVec yd = idft(x).cwiseProduct(doppler_phasor(2e3, cfg.M, cfg.delta_tau()));
  CHECK(std::abs(estimate_gain(yd, x, 0.0, cfg)) < 1.0);
  CHECK(estimate_gain(ComplexVec::Zero(cfg.M), x, 0.0, cfg) == cplx(0.0, 0.0));
}

TEST_CASE("pilot-stage estimation, noiseless reference channel") {
  OfdmConfig cfg;
  std::mt19937_64 rng(4);
  const ComplexVec x = default_pilot(cfg.M);
  const auto ch = table_channel();
  const auto est = estimate_paths(generate_observation(x, 1, ch, cfg, rng), x, cfg, {});
  REQUIRE(est.size() == 4);
  for (const auto& truth : ch.paths) {
    const auto it = std::min_element(est.begin(), est.end(), [&](auto& a, auto& b) {
      return std::abs(a.theta_hat - truth.theta) < std::abs(b.theta_hat - truth.theta);
    });
    CHECK(std::abs(it->theta_hat - truth.theta) <= 0.5 * kDeg);
    CHECK(std::abs(it->tau_hat - truth.tau) <= cfg.delta_tau() * 0.1);
    const cplx g1 = ch.gain_at(static_cast<std::size_t>(&truth - ch.paths.data()), 1, cfg);
    CHECK_MESSAGE(std::abs(std::abs(it->alpha_hat) / std::abs(g1) - 1.0) < 0.01,
                  "gain magnitude error for path at " << truth.theta / kDeg);
  }
}

TEST_CASE("pilot-stage estimation, single broadside path") {
  OfdmConfig cfg;
  std::mt19937_64 rng(5);
  const ComplexVec x = default_pilot(cfg.M);
  ChannelRealization ch;
  ch.paths = {{0.0, 0.0, 0.0, 1.0, 1.0}};
  const auto est = estimate_paths(generate_observation(x, 1, ch, cfg, rng), x, cfg, {});
  REQUIRE(est.size() == 1);
  CHECK(std::abs(est[0].theta_hat) < 1e-12);
  CHECK(est[0].tau_hat == 0.0);
  CHECK(std::abs(est[0].alpha_hat - ch.gain_at(0, 1, cfg)) < 1e-12);
  CHECK_THROWS_AS(estimate_paths(ComplexMat::Zero(cfg.M, cfg.N_r), x, cfg, {}), NoPathsDetected);
  CHECK_THROWS_AS(estimate_paths(ComplexMat::Zero(4, 4), x, cfg, {}), DimensionError);
}

TEST_CASE("pilot-stage estimation at 15 dB finds all four paths") {
  OfdmConfig cfg;
  std::mt19937_64 rng(6);
  const ComplexVec x = default_pilot(cfg.M);
  ScenarioSpec s;
  s.snr_db = 15.0;
  int complete = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto ch = draw_channel(cfg, s, rng);
    complete += estimate_paths(generate_observation(x, 1, ch, cfg, rng), x, cfg, {}).size() == 4;
  }
  CHECK(complete >= 990);
}

TEST_CASE("inter-path leakage shrinks with array size") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-60, 60);
  for (int t = 0; t < 200; ++t) {
    const double a = u(rng) * kDeg;
    double b = u(rng) * kDeg;
    if (std::abs(a - b) < 10 * kDeg) continue;
    double prev = 1e300;
    for (int N_r : {8, 16, 32, 64}) {
      // Envelope of |a^T(a) a*(b)|^2 / N_r^2 over the sidelobe: 1 / (N_r sin(pi u / 2))^2.
      const double du = std::abs(std::sin(a) - std::sin(b));
      const double bound = 1.0 / std::pow(N_r * std::sin(kPi * du / 2), 2);
      const double leak =
          std::norm(steering_vector(b, N_r, 0.5).dot(steering_vector(a, N_r, 0.5))) /
          (double(N_r) * N_r);
      CHECK(leak <= bound * (1 + 1e-9));
      CHECK(bound <= prev);
      prev = bound;
    }
  }
}
