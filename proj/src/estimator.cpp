#include "doaofdm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/fisher_f.hpp>

#include "doaofdm/errors.hpp"

namespace doaofdm {

double CfarConfig::threshold_scale(int n_train) const {
  if (scale_override > 0.0) return scale_override;
  if (n_train < 1) throw ParameterError("CFAR window has no training cells");
  const double d1 = 2.0 * looks;
  const double d2 = 2.0 * looks * n_train;
  boost::math::fisher_f_distribution<double> f(d1, d2);
  return boost::math::quantile(boost::math::complement(f, pfa));
}

void CfarConfig::validate() const {
  if (training < 1) throw ParameterError("CFAR training cells must be >= 1");
  if (guard < 0) throw ParameterError("CFAR guard cells must be >= 0");
  if (looks < 1) throw ParameterError("CFAR looks must be >= 1");
  if (scale_override <= 0.0 && !(pfa > 0.0 && pfa < 1.0)) {
    throw ParameterError("CFAR pfa must lie in (0, 1)");
  }
}

void EstimatorConfig::validate() const {
  cfar.validate();
  if (!(angle_step_deg > 0.0)) throw ParameterError("angle step must be positive");
  if (!(angle_min_deg > -90.0 && angle_max_deg < 90.0 && angle_min_deg < angle_max_deg)) {
    throw ParameterError("angle grid must lie inside (-90, 90) degrees");
  }
  if (!(delay_step_fraction > 0.0)) throw ParameterError("delay step must be positive");
}

std::vector<double> angle_grid(double min_deg, double max_deg, double step_deg) {
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((max_deg - min_deg) / step_deg + 1e-9)) + 1;
  grid.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) grid.push_back((min_deg + i * step_deg) * kPi / 180.0);
  return grid;
}

std::vector<double> delay_grid(const OfdmConfig& cfg, double step_fraction) {
  const double step = cfg.delta_tau() * step_fraction;
  const auto count = static_cast<long>(std::floor(cfg.T_cp / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) grid.push_back(i * step);
  return grid;
}

std::vector<double> angular_spectrum(const ComplexMat& Y1, std::span<const double> grid,
                                     double d_over_lambda) {
  const auto N_r = static_cast<int>(Y1.cols());
  ComplexMat A(N_r, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    A.col(static_cast<Eigen::Index>(g)) = steering_vector(grid[g], N_r, d_over_lambda).conjugate();
  }
  const ComplexMat beams = Y1 * A;
  std::vector<double> P(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    P[g] = beams.col(static_cast<Eigen::Index>(g)).squaredNorm();
  }
  return P;
}

std::vector<std::size_t> cfar_detect(std::span<const double> spectrum, const CfarConfig& cfar) {
  cfar.validate();
  const auto len = static_cast<long>(spectrum.size());
  const long span = cfar.training + cfar.guard;
  if (len <= 2 * span + 1) {
    throw DimensionError("cfar_detect: spectrum of length " + std::to_string(len) +
                         " is too short for the CFAR window");
  }
  std::vector<double> scale_by_count(static_cast<std::size_t>(2 * cfar.training + 1), 0.0);
  std::vector<std::size_t> hits;
  for (long i = 0; i < len; ++i) {
    const double v = spectrum[static_cast<std::size_t>(i)];
    const bool left_ok = i == 0 || v >= spectrum[static_cast<std::size_t>(i - 1)];
    const bool right_ok = i == len - 1 || v > spectrum[static_cast<std::size_t>(i + 1)];
    if (!left_ok || !right_ok) continue;

    double sum = 0.0;
    int count = 0;
    for (long j = i - span; j < i - cfar.guard; ++j) {
      if (j >= 0) {
        sum += spectrum[static_cast<std::size_t>(j)];
        ++count;
      }
    }
    for (long j = i + cfar.guard + 1; j <= i + span; ++j) {
      if (j < len) {
        sum += spectrum[static_cast<std::size_t>(j)];
        ++count;
      }
    }
    auto& scale = scale_by_count[static_cast<std::size_t>(count)];
    if (scale == 0.0) scale = cfar.threshold_scale(count);
    if (v > scale * (sum / count)) hits.push_back(static_cast<std::size_t>(i));
  }
  return hits;
}

ComplexVec angle_mf(const ComplexMat& Y_n, double theta, double d_over_lambda) {
  const auto N_r = static_cast<int>(Y_n.cols());
  return Y_n * steering_vector(theta, N_r, d_over_lambda).conjugate() / static_cast<double>(N_r);
}

namespace {

// b~(tau)^H y = (x_1 .* b(tau))^H F y = sum_q conj(x_q) (Fy)_q e^{+j2pi q tau df}.
cplx delay_correlation(const ComplexVec& z, double tau, double delta_f) {
  const cplx step = std::polar(1.0, 2.0 * kPi * tau * delta_f);
  cplx rot{1.0, 0.0};
  cplx acc{0.0, 0.0};
  for (Eigen::Index q = 0; q < z.size(); ++q) {
    acc += z[q] * rot;
    rot *= step;
    // Periodic re-anchoring keeps the recursive rotation from drifting.
    if ((q & 31) == 31) rot = std::polar(1.0, 2.0 * kPi * tau * delta_f * static_cast<double>(q + 1));
  }
  return acc;
}

ComplexVec pilot_weighted_spectrum(const ComplexVec& y, const ComplexVec& x_1) {
  if (y.size() != x_1.size()) throw DimensionError("branch and pilot lengths differ");
  return x_1.conjugate().cwiseProduct(dft(y));
}

}  // namespace

double estimate_delay(const ComplexVec& y_p1, const ComplexVec& x_1, std::span<const double> grid,
                      double delta_f) {
  if (grid.empty()) throw ParameterError("estimate_delay: empty delay grid");
  const ComplexVec z = pilot_weighted_spectrum(y_p1, x_1);
  double best_tau = grid.front();
  double best = -1.0;
  for (double tau : grid) {
    const double mag = std::abs(delay_correlation(z, tau, delta_f));
    if (mag > best) {
      best = mag;
      best_tau = tau;
    }
  }
  return best_tau;
}

cplx estimate_gain(const ComplexVec& y_p1, const ComplexVec& x_1, double tau_hat,
                   const OfdmConfig& cfg) {
  const ComplexVec z = pilot_weighted_spectrum(y_p1, x_1);
  return delay_correlation(z, tau_hat, cfg.delta_f) / (cfg.M * std::sqrt(cfg.P_T));
}

std::vector<PathEstimate> estimate_paths(const ComplexMat& Y1, const ComplexVec& x_1,
                                         const OfdmConfig& cfg, const EstimatorConfig& est) {
  est.validate();
  if (Y1.rows() != cfg.M || Y1.cols() != cfg.N_r) {
    throw DimensionError("estimate_paths: pilot observation must be M x N_r");
  }
  const auto grid = angle_grid(est.angle_min_deg, est.angle_max_deg, est.angle_step_deg);
  const auto spectrum = angular_spectrum(Y1, grid, cfg.d_over_lambda());

  CfarConfig cfar = est.cfar;
  cfar.looks = cfg.M;
  auto hits = cfar_detect(spectrum, cfar);
  if (hits.empty()) throw NoPathsDetected();

  // Strongest first, then drop sidelobe-level peaks and peaks inside the main lobe
  // of a stronger detection (first-null half width lambda / (N_r d) in sin-space).
  std::sort(hits.begin(), hits.end(),
            [&](std::size_t a, std::size_t b) { return spectrum[a] > spectrum[b]; });
  const double floor = spectrum[hits.front()] * db_to_linear(est.sidelobe_guard_db);
  const double lobe = 1.0 / (cfg.N_r * cfg.d_over_lambda());
  std::vector<std::size_t> kept;
  for (std::size_t h : hits) {
    if (spectrum[h] < floor) continue;
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return std::abs(std::sin(grid[h]) - std::sin(grid[k])) < lobe;
    });
    if (!dup) kept.push_back(h);
  }

  const auto delays = delay_grid(cfg, est.delay_step_fraction);
  const double step = est.angle_step_deg * kPi / 180.0;
  std::vector<PathEstimate> out;
  out.reserve(kept.size());
  for (std::size_t h : kept) {
    double theta = grid[h];
    if (h > 0 && h + 1 < spectrum.size()) {
      const double l = spectrum[h - 1], c = spectrum[h], r = spectrum[h + 1];
      const double denom = l - 2.0 * c + r;
      if (denom < 0.0) theta += std::clamp(0.5 * (l - r) / denom, -0.5, 0.5) * step;
    }
    PathEstimate pe;
    pe.theta_hat = theta;
    const ComplexVec y = angle_mf(Y1, theta, cfg.d_over_lambda());
    pe.tau_hat = estimate_delay(y, x_1, delays, cfg.delta_f);
    pe.alpha_hat = estimate_gain(y, x_1, pe.tau_hat, cfg);
    out.push_back(pe);
  }
  return out;
}

}  // namespace doaofdm
