#include "doaofdm/bounds.hpp"

#include <cmath>
#include <string>

#include "doaofdm/errors.hpp"

namespace doaofdm {

namespace {

void check_index(std::size_t p, const ChannelRealization& channel) {
  if (p >= channel.paths.size()) {
    throw ParameterError("path index " + std::to_string(p) + " out of range");
  }
}

double path_power(const PathParams& path, const BoundOptions& opt) {
  return opt.use_average_power ? path.avg_power : std::norm(path.alpha);
}

double weighted_time_sum(int n, const ComplexVec& x_n, double tau, const OfdmConfig& cfg) {
  if (x_n.size() != cfg.M) throw DimensionError("symbol length does not match M");
  const ComplexVec bt = idft(x_n.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f)));
  const double t_n = cfg.symbol_start(n);
  double acc = 0.0;
  for (int q = 0; q < cfg.M; ++q) {
    const double t = t_n + q * cfg.delta_tau();
    acc += t * t * std::norm(bt[q]);
  }
  return acc;
}

}  // namespace

double ipi_power(std::size_t p, const ChannelRealization& channel, const OfdmConfig& cfg,
                 const BoundOptions& opt) {
  check_index(p, channel);
  const ComplexVec ap = steering_vector(channel.paths[p].theta, cfg.N_r, cfg.d_over_lambda());
  double acc = 0.0;
  for (std::size_t i = 0; i < channel.paths.size(); ++i) {
    if (i == p) continue;
    const ComplexVec ai = steering_vector(channel.paths[i].theta, cfg.N_r, cfg.d_over_lambda());
    // a^T(theta_p) a*(theta_i) is the conjugate of ai^H ap; only the magnitude matters.
    const double leak = std::norm(ai.dot(ap));
    if (opt.ipi == IpiModel::Unnormalized) {
      acc += leak;
    } else {
      acc += path_power(channel.paths[i], opt) * leak / (double(cfg.N_r) * cfg.N_r);
    }
  }
  if (opt.ipi == IpiModel::Unnormalized) acc *= path_power(channel.paths[p], opt);
  return cfg.P_T * acc;
}

double noise_floor(std::size_t p, const ChannelRealization& channel, const OfdmConfig& cfg,
                   const BoundOptions& opt) {
  const double sigma2 =
      opt.ipi == IpiModel::Unnormalized ? channel.sigma2 : channel.sigma2 / cfg.N_r;
  const double floor = sigma2 + ipi_power(p, channel, cfg, opt);
  if (!(floor > 0.0)) {
    throw ParameterError("noise plus interference is zero; Fisher information is unbounded");
  }
  return floor;
}

double cfi_symbol(std::size_t p, int n, const ComplexVec& x_n, const ChannelRealization& channel,
                  const OfdmConfig& cfg, const BoundOptions& opt) {
  check_index(p, channel);
  if (n < 1) throw ParameterError("symbol index must be >= 1");
  const double floor = noise_floor(p, channel, cfg, opt);
  const auto& path = channel.paths[p];
  return 8.0 * kPi * kPi * path_power(path, opt) * cfg.P_T / floor *
         weighted_time_sum(n, x_n, path.tau, cfg);
}

double cfi_pilot(std::size_t p, const ComplexVec& x_1, const ChannelRealization& channel,
                 const OfdmConfig& cfg, const BoundOptions& opt) {
  return cfi_symbol(p, 1, x_1, channel, cfg, opt);
}

double theta_norm_sq(const OfdmConfig& cfg) {
  if (cfg.N < 2) throw ParameterError("theta_norm_sq: N must be >= 2");
  const auto len = static_cast<std::size_t>(cfg.N - 1) * static_cast<std::size_t>(cfg.M);
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const int n = static_cast<int>(i / cfg.M) + 2;
    const int q = static_cast<int>(i % cfg.M);
    const double t = cfg.symbol_start(n) + q * cfg.delta_tau();
    acc += t * t;
  }
  return acc;
}

double aggregated_cfi(std::size_t p, const ComplexVec& x_1, const ChannelRealization& channel,
                      const OfdmConfig& cfg, const BoundOptions& opt) {
  check_index(p, channel);
  if (cfg.N < 2) throw ParameterError("aggregated_cfi: N must be >= 2");
  BoundOptions avg = opt;
  avg.use_average_power = true;
  const double floor = noise_floor(p, channel, cfg, avg);
  const auto& path = channel.paths[p];
  return 8.0 * kPi * kPi * path.avg_power * cfg.P_T / floor *
         (weighted_time_sum(1, x_1, path.tau, cfg) + theta_norm_sq(cfg));
}

FimTerms fim_terms(const ChannelRealization& channel, const OfdmConfig& cfg,
                   const ComplexVec& x_1, const BoundOptions& opt) {
  if (channel.paths.empty()) throw ParameterError("fim_terms: channel has no paths");
  FimTerms t;
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < channel.paths.size(); ++p) {
    BoundOptions avg = opt;
    avg.use_average_power = true;
    t.p_ipi.push_back(ipi_power(p, channel, cfg, avg));
    t.pilot_cfi.push_back(cfi_pilot(p, x_1, channel, cfg, opt));
    const double I = aggregated_cfi(p, x_1, channel, cfg, opt);
    if (!(I > 0.0)) {
      throw ParameterError("path " + std::to_string(p) + " carries no Doppler information");
    }
    t.aggregated.push_back(I);
    t.mcrlb.push_back(1.0 / I);
    num += channel.paths[p].avg_power / I;
    den += channel.paths[p].avg_power;
  }
  if (!(den > 0.0)) throw ParameterError("fim_terms: total path power is zero");
  t.weighted = num / den;
  return t;
}

double mcrlb_weighted(const ChannelRealization& channel, const OfdmConfig& cfg,
                      const ComplexVec& x_1, const BoundOptions& opt) {
  return fim_terms(channel, cfg, x_1, opt).weighted;
}

}  // namespace doaofdm
