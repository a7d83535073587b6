#include "doaofdm/receiver.hpp"

#include <cmath>
#include <string>

#include "doaofdm/errors.hpp"

namespace doaofdm {

int window_length(double sigma_nu, double T_prime, int N) {
  if (sigma_nu < 0.0) throw ParameterError("window_length: sigma_nu must be >= 0");
  if (N < 8) throw ParameterError("window_length: N must be >= 8");
  const int half = N / 2;
  if (sigma_nu == 0.0) return half;
  const double bound = std::floor(1.0 + 1.0 / (2.0 * sigma_nu * T_prime));
  return bound < half ? static_cast<int>(bound) : half;
}

ComplexVec ici_compensate(const ComplexVec& y_pn, double nu_hat, double delta_tau) {
  const auto M = static_cast<int>(y_pn.size());
  return y_pn.cwiseProduct(doppler_phasor(nu_hat, M, delta_tau).conjugate());
}

ComplexVec delay_compensate(const ComplexVec& y_ici, double tau_hat, double delta_f) {
  const auto M = static_cast<int>(y_ici.size());
  return dft(y_ici).cwiseProduct(delay_phasor(tau_hat, M, delta_f).conjugate());
}

ComplexVec mrc_combine(std::span<const ComplexVec> x_hat_paths, std::span<const cplx> gains) {
  if (x_hat_paths.empty()) throw ParameterError("mrc_combine: no branches");
  if (gains.size() != x_hat_paths.size()) {
    throw DimensionError("mrc_combine: branch and gain counts differ");
  }
  ComplexVec out = ComplexVec::Zero(x_hat_paths.front().size());
  for (std::size_t p = 0; p < x_hat_paths.size(); ++p) {
    if (x_hat_paths[p].size() != out.size()) {
      throw DimensionError("mrc_combine: branch lengths differ");
    }
    out += std::conj(gains[p]) * x_hat_paths[p];
  }
  return out;
}

cplx ls_gain_update(const ComplexVec& y_pn, const ComplexVec& x_dagger, double tau_hat,
                    double nu_hat, const OfdmConfig& cfg) {
  if (y_pn.size() != cfg.M || x_dagger.size() != cfg.M) {
    throw DimensionError("ls_gain_update: expected length-M vectors");
  }
  const ComplexVec ref = idft(x_dagger.cwiseProduct(delay_phasor(tau_hat, cfg.M, cfg.delta_f)))
                             .cwiseProduct(doppler_phasor(nu_hat, cfg.M, cfg.delta_tau()));
  return ref.dot(y_pn) / (cfg.M * std::sqrt(cfg.P_T));
}

double doppler_from_gains(cplx alpha_end, cplx alpha_start, int K, double T_prime) {
  if (K < 2) throw ParameterError("doppler_from_gains: K must be >= 2");
  if (alpha_end == cplx{} || alpha_start == cplx{}) {
    throw ParameterError("doppler_from_gains: phase of a zero gain is undefined");
  }
  return std::arg(alpha_end * std::conj(alpha_start)) / (2.0 * kPi * (K - 1) * T_prime);
}

namespace {

struct Branch {
  double theta;
  double tau;
  std::vector<ComplexVec> y;  // angle-MF output per symbol, y[n-1]
};

// Compensated branch symbols x_hat_{p,n} = F(y .* c*(nu)) .* b*(tau).
ComplexVec compensate(const ComplexVec& y, double nu, double tau, const OfdmConfig& cfg) {
  return delay_compensate(ici_compensate(y, nu, cfg.delta_tau()), tau, cfg.delta_f);
}

// With x_hat = F(y .* c*(nu)) .* b*(tau), the LS gain reduces to
// x_dagger^H x_hat / (M sqrt(P_T)); no extra transform is needed.
cplx ls_from_compensated(const ComplexVec& x_hat, const ComplexVec& x_dagger,
                         const OfdmConfig& cfg) {
  return x_dagger.dot(x_hat) / (cfg.M * std::sqrt(cfg.P_T));
}

bool usable(cplx g) { return std::isfinite(g.real()) && std::isfinite(g.imag()) && g != cplx{}; }

void emit(DecodedFrame& out, int n, const ComplexVec& combined) {
  auto sliced = qam_slice(combined);
  const auto idx = static_cast<std::size_t>(n - 2);
  out.symbols[idx] = std::move(sliced.symbols);
  out.bits[idx] = std::move(sliced.bits);
  ++out.emit_count[idx];
}

DecodedFrame empty_output(int N, std::size_t P) {
  DecodedFrame out;
  out.symbols.resize(static_cast<std::size_t>(N - 1));
  out.bits.resize(static_cast<std::size_t>(N - 1));
  out.emit_count.assign(static_cast<std::size_t>(N - 1), 0);
  out.gain_track.assign(P, std::vector<cplx>(static_cast<std::size_t>(N)));
  return out;
}

}  // namespace

DecodedFrame detect_frame(const ObservationFrame& frame, std::span<const PathEstimate> paths,
                          int K) {
  const OfdmConfig& cfg = frame.config;
  const int N = frame.num_symbols();
  if (paths.empty()) throw ParameterError("detect_frame: no paths to track");
  if (K < 2) throw ParameterError("detect_frame: K must be >= 2");
  if (N < K + 2) {
    throw ParameterError("detect_frame: need N >= K + 2 (N = " + std::to_string(N) +
                         ", K = " + std::to_string(K) + ")");
  }
  const std::size_t P = paths.size();
  const double Tp = cfg.T_prime();

  std::vector<Branch> branches(P);
  std::vector<double> nu(P);
  DecodedFrame out = empty_output(N, P);
  auto& alpha = out.gain_track;  // alpha[p][n-1]
  for (std::size_t p = 0; p < P; ++p) {
    branches[p].theta = paths[p].theta_hat;
    branches[p].tau = paths[p].tau_hat;
    branches[p].y.reserve(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
      branches[p].y.push_back(angle_mf(frame.symbol(n), paths[p].theta_hat, cfg.d_over_lambda()));
    }
    nu[p] = paths[p].nu_hat;
    alpha[p][0] = paths[p].alpha_hat;
    if (!usable(alpha[p][0])) throw TrackingFailure("detect_frame: unusable pilot gain");
  }

  std::vector<ComplexVec> x_hat(P);
  std::vector<cplx> g(P);
  auto at = [](std::vector<cplx>& track, int n) -> cplx& {
    return track[static_cast<std::size_t>(n - 1)];
  };

  for (int n = 2; n <= N - K + 1; ++n) {
    if (n < N - K + 1) {
      for (int k = 1; k <= K; ++k) {
        const int m = n + k - 1;
        for (std::size_t p = 0; p < P; ++p) {
          x_hat[p] = compensate(branches[p].y[static_cast<std::size_t>(m - 1)], nu[p],
                                branches[p].tau, cfg);
          at(alpha[p], m) = at(alpha[p], m - 1) * std::polar(1.0, 2.0 * kPi * nu[p] * Tp);
          g[p] = at(alpha[p], m);
        }
        const ComplexVec decided = qam_decide(mrc_combine(x_hat, g));
        for (std::size_t p = 0; p < P; ++p) {
          const cplx refreshed = ls_from_compensated(x_hat[p], decided, cfg);
          if (usable(refreshed)) {
            at(alpha[p], m) = refreshed;
          } else {
            ++out.clamped_gains;
          }
        }
      }
      for (std::size_t p = 0; p < P; ++p) {
        nu[p] = doppler_from_gains(at(alpha[p], n + K - 1), at(alpha[p], n), K, Tp);
      }
      out.nu_trajectory.push_back(nu);
      for (std::size_t p = 0; p < P; ++p) {
        x_hat[p] = compensate(branches[p].y[static_cast<std::size_t>(n - 1)], nu[p],
                              branches[p].tau, cfg);
        g[p] = at(alpha[p], n);
      }
      emit(out, n, mrc_combine(x_hat, g));
    } else {
      for (int k = 1; k <= K; ++k) {
        const int m = n + k - 1;
        for (std::size_t p = 0; p < P; ++p) {
          x_hat[p] = compensate(branches[p].y[static_cast<std::size_t>(m - 1)], nu[p],
                                branches[p].tau, cfg);
          at(alpha[p], m) = at(alpha[p], n - 1) * std::polar(1.0, 2.0 * kPi * nu[p] * k * Tp);
          g[p] = at(alpha[p], m);
        }
        emit(out, m, mrc_combine(x_hat, g));
      }
    }
  }
  for (std::size_t p = 0; p < P; ++p) {
    for (const auto& a : alpha[p]) {
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
        throw TrackingFailure("detect_frame: non-finite gain in track");
      }
    }
  }
  out.nu_hat = nu;
  return out;
}

DecodedFrame detect_with_known_channel(const ObservationFrame& frame,
                                       const ChannelRealization& channel) {
  const OfdmConfig& cfg = frame.config;
  const int N = frame.num_symbols();
  const std::size_t P = channel.paths.size();
  if (P == 0) throw ParameterError("detect_with_known_channel: no paths");
  DecodedFrame out = empty_output(N, P);
  std::vector<ComplexVec> x_hat(P);
  std::vector<cplx> g(P);
  for (std::size_t p = 0; p < P; ++p) {
    for (int n = 1; n <= N; ++n) {
      out.gain_track[p][static_cast<std::size_t>(n - 1)] = channel.gain_at(p, n, cfg);
    }
    out.nu_hat.push_back(channel.paths[p].nu);
  }
  for (int n = 2; n <= N; ++n) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto& path = channel.paths[p];
      x_hat[p] = compensate(angle_mf(frame.symbol(n), path.theta, cfg.d_over_lambda()), path.nu,
                            path.tau, cfg);
      g[p] = out.gain_track[p][static_cast<std::size_t>(n - 1)];
    }
    emit(out, n, mrc_combine(x_hat, g));
  }
  return out;
}

}  // namespace doaofdm
