#include "doaofdm/channel_sim.hpp"

#include <cmath>
#include <string>

#include "doaofdm/errors.hpp"

namespace doaofdm {

std::vector<PathGeometry> reference_geometry() {
  const double deg = kPi / 180.0;
  return {
      {10.0 * deg, 0.0, 0.0},
      {50.0 * deg, 0.9e-6, -1.0},
      {-30.0 * deg, 2.4e-6, -5.0},
      {20.0 * deg, 3.0e-6, -7.0},
  };
}

cplx ChannelRealization::gain_at(std::size_t p, int n, const OfdmConfig& cfg) const {
  const auto& path = paths.at(p);
  return path.alpha * std::polar(1.0, 2.0 * kPi * path.nu * cfg.symbol_start(n));
}

double ChannelRealization::gain_norm_sq() const {
  double s = 0.0;
  for (const auto& p : paths) s += std::norm(p.alpha);
  return s;
}

double doppler_spread(double v_max_kmh, double fc) {
  return fc * (v_max_kmh / 3.6) / kSpeedOfLight;
}

double noise_variance_for_snr(std::span<const cplx> alpha, double P_T, double snr) {
  if (!(snr > 0.0)) throw ParameterError("noise_variance_for_snr: snr must be positive");
  double norm_sq = 0.0;
  for (const auto& a : alpha) norm_sq += std::norm(a);
  return norm_sq * P_T / snr;
}

ChannelRealization draw_channel(const OfdmConfig& cfg, const ScenarioSpec& scenario,
                                std::mt19937_64& rng) {
  if (scenario.v_max_kmh < 0.0) throw ParameterError("draw_channel: v_max must be >= 0");
  if (scenario.paths.empty()) throw ParameterError("draw_channel: scenario has no paths");
  if (!scenario.doppler_hz.empty() && scenario.doppler_hz.size() != scenario.paths.size()) {
    throw ParameterError("draw_channel: doppler_hz must list one value per path");
  }
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const double spread = doppler_spread(scenario.v_max_kmh, cfg.fc);

  ChannelRealization ch;
  std::vector<cplx> alphas;
  for (std::size_t p = 0; p < scenario.paths.size(); ++p) {
    const auto& g = scenario.paths[p];
    PathParams path;
    path.theta = g.theta;
    path.tau = g.tau;
    path.avg_power = db_to_linear(g.power_db);
    const double arrival = phase(rng);
    path.nu = scenario.doppler_hz.empty() ? spread * std::cos(arrival) : scenario.doppler_hz[p];
    path.alpha = std::polar(std::sqrt(path.avg_power), phase(rng));
    alphas.push_back(path.alpha);
    ch.paths.push_back(path);
  }
  ch.sigma2 = noise_variance_for_snr(alphas, cfg.P_T, db_to_linear(scenario.snr_db));
  check_channel_fits(ch, cfg);
  return ch;
}

void check_channel_fits(const ChannelRealization& channel, const OfdmConfig& cfg) {
  for (const auto& p : channel.paths) {
    if (p.tau < 0.0 || p.tau > cfg.T_cp) {
      throw ParameterError("path delay " + std::to_string(p.tau) +
                           " s lies outside the cyclic prefix");
    }
  }
}

ComplexMat generate_observation(const ComplexVec& x_n, int n, const ChannelRealization& channel,
                                const OfdmConfig& cfg, std::mt19937_64& rng) {
  if (x_n.size() != cfg.M) {
    throw DimensionError("generate_observation: symbol vector has " +
                         std::to_string(x_n.size()) + " entries, expected M = " +
                         std::to_string(cfg.M));
  }
  if (n < 1) throw ParameterError("generate_observation: symbol index starts at 1");

  ComplexMat Y = ComplexMat::Zero(cfg.M, cfg.N_r);
  const double amp = std::sqrt(cfg.P_T);
  for (std::size_t p = 0; p < channel.paths.size(); ++p) {
    const auto& path = channel.paths[p];
    ComplexVec v = idft(x_n.cwiseProduct(delay_phasor(path.tau, cfg.M, cfg.delta_f)))
                       .cwiseProduct(doppler_phasor(path.nu, cfg.M, cfg.delta_tau()));
    v *= amp * channel.gain_at(p, n, cfg);
    Y.noalias() += v * steering_vector(path.theta, cfg.N_r, cfg.d_over_lambda()).transpose();
  }
  if (channel.sigma2 > 0.0) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(channel.sigma2 / 2.0));
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
      for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        Y(i, j) += cplx(re, im);
      }
    }
  }
  return Y;
}

GeneratedFrame generate_frame(const ComplexVec& pilot, const std::vector<Bits>& data_bits,
                              const ChannelRealization& channel, const OfdmConfig& cfg,
                              std::mt19937_64& rng) {
  if (data_bits.size() != static_cast<std::size_t>(cfg.N - 1)) {
    throw DimensionError("generate_frame: expected " + std::to_string(cfg.N - 1) +
                         " data symbols, got " + std::to_string(data_bits.size()));
  }
  GeneratedFrame out;
  out.frame.config = cfg;
  out.frame.Y.reserve(static_cast<std::size_t>(cfg.N));
  out.symbols.reserve(static_cast<std::size_t>(cfg.N));
  out.symbols.push_back(pilot);
  for (const auto& bits : data_bits) out.symbols.push_back(qam_map(bits));
  for (int n = 1; n <= cfg.N; ++n) {
    out.frame.Y.push_back(
        generate_observation(out.symbols[static_cast<std::size_t>(n - 1)], n, channel, cfg, rng));
  }
  return out;
}

Bits random_bits(std::size_t count, std::mt19937_64& rng) {
  Bits bits(count);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return bits;
}

}  // namespace doaofdm
