// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "doaofdm/bounds.hpp"
#include "doaofdm/harness.hpp"

using namespace doaofdm;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const ComplexVec& pilot() {
  static const ComplexVec x = default_pilot(128);
  return x;
}

// Trained once, shared by the regression and the mobility criteria.
const TrainingSummary& trained() {
  static const TrainingSummary s = [] {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::TrainFnn;
    cfg.training.samples = 50000;
    cfg.training.epochs = 30;
    cfg.test_snr_db = 15.0;
    return train_and_evaluate(cfg, pilot());
  }();
  return s;
}

Verdict perfect_csi_vs_awgn() {
  ExperimentConfig cfg;
  cfg.init = InitMethod::PerfectCsi;
  cfg.v_max_kmh = 300.0;
  cfg.sweep = {-10.0, -8.0, -6.0};
  cfg.trials = 500;
  cfg.seed = 101;
  const auto r = run_ber_vs_snr(cfg, {pilot(), std::nullopt});
  Verdict v{true, ""};
  for (const auto& p : r.points) {
    const double ratio = p.ber / p.ber_awgn_ref;
    if (p.ber_awgn_ref >= 1e-4 && !(ratio <= 1.5 && ratio >= 1.0 / 1.5)) v.pass = false;
    v.detail += fmt("[%g dB: ber %.3e ref %.3e ratio %.3f, %.1f s] ", p.sweep_value, p.ber,
                    p.ber_awgn_ref, ratio, p.wall_seconds);
  }
  return v;
}

Verdict overhead_accounting() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Accounting;
  const auto r = accounting(cfg);
  std::ostringstream os;
  write_accounting(os, r, cfg);
  const std::string text = os.str();
  const bool printed = text.find("1/260 = 0.385%") != std::string::npos &&
                       text.find("1/26 = 3.846%") != std::string::npos;
  const bool pass = printed && r.continuous_frame_symbols == 260 &&
                    r.short_frame_symbols == 26 && r.short_frame_overhead < 0.04 &&
                    std::abs(r.latency_s - 8 * cfg.ofdm.T_prime()) < 1e-15;
  return {pass, fmt("continuous 1/%d = %.3f%%, 1 ms frame 1/%d = %.3f%%, latency %.3f us",
                    r.continuous_frame_symbols, 100 * r.continuous_overhead,
                    r.short_frame_symbols, 100 * r.short_frame_overhead, r.latency_s * 1e6)};
}

Verdict mobility_resilience() {
  ExperimentConfig cfg;
  cfg.snr_db = -4.0;
  cfg.sweep = {100.0, 1000.0};
  cfg.trials = 500;
  cfg.seed = 303;
  TrialContext ctx{pilot(), trained().report.model};
  cfg.init = InitMethod::Dl;
  const auto dl = run_ber_vs_speed(cfg, ctx);
  cfg.init = InitMethod::Zd;
  const auto zd = run_ber_vs_speed(cfg, ctx);
  const double dl100 = dl.points[0].ber, dl1000 = dl.points[1].ber, zd1000 = zd.points[1].ber;
  const bool flat = dl1000 <= 3.0 * dl100;
  const bool gap = zd1000 >= 10.0 * dl1000;
  return {flat && gap,
          fmt("dl 100 km/h %.3e, dl 1000 km/h %.3e (ratio %.2f, limit 3), zd 1000 km/h %.3e "
              "(zd/dl %.1f, need >= 10), failures dl %d/%d zd %d",
              dl100, dl1000, dl1000 / dl100, zd1000, zd1000 / dl1000,
              dl.points[0].frame_failures, dl.points[1].frame_failures,
              zd.points[1].frame_failures)};
}

Verdict rmse_vs_bound() {
  ExperimentConfig cfg;
  cfg.trials = 500;
  cfg.seed = 404;
  TrialContext ctx{pilot(), trained().report.model};
  cfg.init = InitMethod::Zd;
  cfg.v_max_kmh = 300.0;
  cfg.sweep = {0.0, 5.0};
  const auto zd300 = run_rmse_vs_snr(cfg, ctx);
  Verdict v{true, ""};
  for (const auto& p : zd300.points) {
    const double ratio = p.rmse_hz / p.mcrlb_hz;
    if (!(ratio <= 10.0)) v.pass = false;
    v.detail += fmt("[300 km/h %g dB: zd rmse %.2f Hz, sqrt bound %.2f Hz, ratio %.2f] ",
                    p.sweep_value, p.rmse_hz, p.mcrlb_hz, ratio);
  }
  cfg.v_max_kmh = 1000.0;
  for (double snr : {0.0, 5.0}) {
    cfg.sweep = {snr};
    double rmse[3];
    const InitMethod methods[3] = {InitMethod::Dl, InitMethod::Zd, InitMethod::Evm};
    for (int m = 0; m < 3; ++m) {
      cfg.init = methods[m];
      rmse[m] = run_rmse_vs_snr(cfg, ctx).points[0].rmse_hz;
    }
    if (!(rmse[0] < rmse[1] && rmse[0] < rmse[2])) v.pass = false;
    v.detail += fmt("[1000 km/h %g dB: dl %.1f Hz, zd %.1f Hz, evm %.1f Hz] ", snr, rmse[0],
                    rmse[1], rmse[2]);
  }
  return v;
}

Verdict zd_speed_limit() {
  ExperimentConfig cfg;
  cfg.path_theta_deg = {10.0};
  cfg.path_tau_s = {0.0};
  cfg.path_power_db = {0.0};
  cfg.init = InitMethod::Zd;
  cfg.trials = 200;
  cfg.seed = 505;
  const double nu_max = 1.0 / (8.0 * cfg.ofdm.T_prime());
  Verdict v{true, fmt("nu_max %.1f Hz: ", nu_max)};
  // The receiver's speed bound covers the whole sweep. A bound equal to the pinned
  // Doppler would put the window phase exactly at pi, where the sign is ambiguous.
  cfg.v_max_kmh = 2.0 * nu_max / cfg.ofdm.fc * kSpeedOfLight * 3.6;
  const double fractions[] = {0.2, 0.4, 0.6, 0.7, 0.75, 0.79, 1.21, 1.3, 1.5, 1.8};
  for (double f : fractions) {
    const double nu = f * nu_max;
    cfg.doppler_hz = {nu};
    cfg.sweep = {10.0};
    const auto r = run_ber_vs_snr(cfg, {pilot(), std::nullopt});
    const double ber = r.points[0].ber;
    if (f < 0.8 && !(ber < 1e-3)) v.pass = false;
    if (f > 1.2 && !(ber > 1e-1)) v.pass = false;
    v.detail += fmt("[%.2f: %.2e] ", f, ber);
  }
  return v;
}

Verdict fnn_quality() {
  const auto& s = trained();
  // Gradient check on a small network against central differences.
  const int M = 8;
  FnnModel net = FnnModel::create(M, std::vector<int>{8, 8, 4, 4}, 5e3, 7);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd X(2 * M, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  Eigen::RowVectorXd y(5);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = g(rng);
  const auto grad = fnn_loss_and_gradient(net, X, y);
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto check = [&](double& param, double analytic) {
      const double keep = param, h = 1e-5;
      param = keep + h;
      const double up = fnn_loss_and_gradient(net, X, y).loss;
      param = keep - h;
      const double dn = fnn_loss_and_gradient(net, X, y).loss;
      param = keep;
      const double numeric = (up - dn) / (2 * h);
      const double denom = std::max(std::abs(numeric) + std::abs(analytic), 1e-7);
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };
    auto& L = net.layers[l];
    for (Eigen::Index i = 0; i < L.W.size(); ++i) check(L.W.data()[i], grad.grads[l].W.data()[i]);
    for (Eigen::Index i = 0; i < L.b.size(); ++i) check(L.b.data()[i], grad.grads[l].b.data()[i]);
  }
  const bool pass = s.test_correlation > 0.99 && s.test_nrmse < 0.05 && worst < 1e-4;
  return {pass, fmt("held-out corr %.5f (> 0.99), nRMSE %.4f (< 0.05), best epoch %d, "
                    "gradient check max rel err %.2e (< 1e-4)",
                    s.test_correlation, s.test_nrmse, s.report.best_epoch, worst)};
}

Verdict oracle_equivalences() {
  std::vector<std::string> failed;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);

  // Observation model: library synthesis vs matrix form vs elementwise sums.
  OfdmConfig small;
  small.M = 64;
  small.N_r = 8;
  small.N = 8;
  ChannelRealization ch;
  ch.paths = {{0.3, 0.7e-6, 1200.0, std::polar(0.9, 0.4), 0.81},
              {-0.6, 2.1e-6, -800.0, std::polar(0.5, -1.3), 0.25}};
  ch.sigma2 = 0.0;
  const ComplexVec x = default_pilot(small.M);
  const int n = 3;
  const ComplexMat Y = generate_observation(x, n, ch, small, rng);
  const ComplexMat F = dft_matrix(small.M);
  ComplexMat Ymat = ComplexMat::Zero(small.M, small.N_r);
  ComplexMat Yel = ComplexMat::Zero(small.M, small.N_r);
  for (std::size_t p = 0; p < ch.paths.size(); ++p) {
    const auto& path = ch.paths[p];
    const cplx gain = std::sqrt(small.P_T) * ch.gain_at(p, n, small);
    const ComplexVec b = delay_phasor(path.tau, small.M, small.delta_f);
    const ComplexVec c = doppler_phasor(path.nu, small.M, small.delta_tau());
    const ComplexVec a = steering_vector(path.theta, small.N_r, 0.5);
    Ymat += gain * (c.asDiagonal() * (F.adjoint() * x.cwiseProduct(b))) * a.transpose();
    for (int q = 0; q < small.M; ++q) {
      cplx s{};
      for (int m = 0; m < small.M; ++m) {
        s += x[m] * std::exp(cplx(0, -2 * kPi * m * path.tau * small.delta_f)) *
             std::exp(cplx(0, 2 * kPi * double(m) * q / small.M));
      }
      s /= std::sqrt(double(small.M));
      const cplx cq = std::exp(cplx(0, 2 * kPi * q * path.nu * small.delta_tau()));
      for (int r = 0; r < small.N_r; ++r) {
        Yel(q, r) += gain * s * cq * std::exp(cplx(0, 2 * kPi * 0.5 * r * std::sin(path.theta)));
      }
    }
  }
  const double e1 = (Y - Ymat).cwiseAbs().maxCoeff();
  const double e2 = (Y - Yel).cwiseAbs().maxCoeff();
  if (!(e1 < 1e-10 && e2 < 1e-10)) failed.push_back(fmt("observation %.1e/%.1e", e1, e2));

  // Compensation chain and LS gain on a noiseless branch.
  const OfdmConfig cfg;
  const ComplexVec xp = default_pilot(cfg.M);
  const double tau = 1.7e-6, nu = 2345.0;
  const cplx alpha = std::polar(0.7, 2.2);
  const ComplexVec y = std::sqrt(cfg.P_T) * alpha *
                       idft(xp.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f)))
                           .cwiseProduct(doppler_phasor(nu, cfg.M, cfg.delta_tau()));
  const ComplexVec back = delay_compensate(ici_compensate(y, nu, cfg.delta_tau()), tau,
                                           cfg.delta_f) / (alpha * std::sqrt(cfg.P_T));
  const double e3 = (back - xp).cwiseAbs().maxCoeff();
  if (!(e3 < 1e-10)) failed.push_back(fmt("compensation %.1e", e3));
  const double e4 = std::abs(ls_gain_update(y, xp, tau, nu, cfg) - alpha) / std::abs(alpha);
  if (!(e4 < 1e-10)) failed.push_back(fmt("ls gain %.1e", e4));

  // Pilot Fisher information against a numerical derivative of the branch mean.
  ChannelRealization one;
  one.paths = {{0.2, tau, nu, alpha, std::norm(alpha)}};
  one.sigma2 = 1.0;
  auto mu = [&](double v) -> ComplexVec {
    const double t1 = cfg.symbol_start(1);
    return std::sqrt(cfg.P_T) * alpha * std::exp(cplx(0, 2 * kPi * v * t1)) *
           idft(xp.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f)))
               .cwiseProduct(doppler_phasor(v, cfg.M, cfg.delta_tau()));
  };
  const double h = 1e-3;
  const double fd = 2.0 / one.sigma2 * ((mu(nu + h) - mu(nu - h)) / (2 * h)).squaredNorm();
  const double cfi = cfi_pilot(0, xp, one, cfg);
  const double e5 = std::abs(cfi - fd) / fd;
  if (!(e5 < 1e-4)) failed.push_back(fmt("pilot cfi %.1e", e5));

  double loop = 0.0;
  for (int m = 2; m <= cfg.N; ++m) {
    for (int q = 0; q < cfg.M; ++q) {
      const double t = m * cfg.T_cp + (m - 1) / cfg.delta_f + q / (cfg.delta_f * cfg.M);
      loop += t * t;
    }
  }
  const double e6 = std::abs(theta_norm_sq(cfg) - loop) / loop;
  if (!(e6 < 1e-9)) failed.push_back(fmt("theta norm %.1e", e6));

  std::string detail = fmt("observation %.1e/%.1e, compensation %.1e, ls gain %.1e, "
                           "pilot cfi %.1e, theta norm %.1e", e1, e2, e3, e4, e5, e6);
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"1 perfect-CSI BER vs AWGN reference", perfect_csi_vs_awgn},
      {"2 pilot overhead accounting", overhead_accounting},
      {"3 mobility resilience", mobility_resilience},
      {"4 RMSE vs MCRLB", rmse_vs_bound},
      {"5 zero-Doppler speed limit", zd_speed_limit},
      {"6 regressor quality", fnn_quality},
      {"7 oracle equivalences", oracle_equivalences},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("CRITERION %s: %s (%.1f s) %s\n", name, v.pass ? "PASS" : "FAIL", secs,
                v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
