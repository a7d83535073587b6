#pragma once

// Experiment plumbing: flat JSON configuration, seeded Monte Carlo sweeps for BER and
// Doppler RMSE, regressor training runs, overhead/complexity/latency accounting and
// CSV emission.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "doaofdm/bounds.hpp"
#include "doaofdm/channel_sim.hpp"
#include "doaofdm/doppler_init.hpp"
#include "doaofdm/estimator.hpp"
#include "doaofdm/receiver.hpp"

namespace doaofdm {

enum class ExperimentKind { BerVsSnr, BerVsSpeed, RmseVsSnr, TrainFnn, Accounting };
enum class InitMethod { Zd, Evm, Dl, PerfectCsi };

std::string to_string(ExperimentKind kind);
std::string to_string(InitMethod method);
ExperimentKind parse_experiment_kind(const std::string& s);
InitMethod parse_init_method(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::BerVsSnr;
  /// SNR points (dB) for the SNR sweeps, speeds (km/h) for the speed sweep.
  std::vector<double> sweep = {-10.0, -8.0, -6.0, -4.0, -2.0, 0.0};
  double v_max_kmh = 300.0;
  double snr_db = -4.0;
  int trials = 500;
  InitMethod init = InitMethod::Zd;
  std::uint64_t seed = 1;

  OfdmConfig ofdm;
  std::vector<double> path_theta_deg = {10.0, 50.0, -30.0, 20.0};
  std::vector<double> path_tau_s = {0.0, 0.9e-6, 2.4e-6, 3.0e-6};
  std::vector<double> path_power_db = {0.0, -1.0, -5.0, -7.0};
  /// Pins per-path Dopplers (Hz) instead of drawing them. Empty means drawn.
  std::vector<double> doppler_hz;

  EstimatorConfig estimator;
  /// Tracking window; 0 selects the coherence formula from v_max.
  int window = 0;
  /// EVM search half-width; 0 uses the maximum Doppler implied by v_max.
  double evm_span_hz = 5000.0;
  double evm_step_hz = 50.0;
  IpiModel bound_ipi = IpiModel::Unnormalized;

  TrainingConfig training;
  std::size_t test_samples = 5000;
  double test_snr_db = 15.0;

  double coherence_time_s = 10e-3;
  double frame_time_s = 1e-3;

  std::string model_path;
  std::string output_path;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
  ScenarioSpec scenario(double v_max_kmh, double snr_db) const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses flat JSON text. Unknown keys, wrong types and invalid values raise
/// ConfigError with the offending line. Missing keys keep their defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);
/// Complete flat JSON with every key, sorted, one per line.
std::string serialize_config(const ExperimentConfig& cfg);

/// Outcome of one simulated frame.
struct TrialOutcome {
  bool failed = false;
  std::string failure;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  /// sum_p |alpha_p|^2 (nu_p - nu_hat_p)^2 / ||alpha||^2 for this frame, Hz^2.
  double weighted_sq_error = 0.0;
  int paths_detected = 0;
  int window = 0;
  int clamped_gains = 0;
  std::vector<double> nu_true;
  std::vector<double> nu_hat;  ///< associated estimate per true path
  std::vector<std::vector<double>> nu_trajectory;
};

/// Resources shared by all trials of a sweep.
struct TrialContext {
  ComplexVec pilot;
  std::optional<FnnModel> model;
};

/// Seed for (base seed, sweep point, trial); independent of the init method so that
/// methods compared at the same point see the same frames.
std::uint64_t trial_seed(std::uint64_t base, std::size_t point, std::size_t trial);

/// Simulates one frame at the given speed and SNR with the configured init method.
TrialOutcome run_trial(const ExperimentConfig& cfg, const TrialContext& ctx, double v_max_kmh,
                       double snr_db, std::uint64_t seed);

/// Nearest-angle association of estimates to true paths within the array main lobe
/// |sin a - sin b| < 2/N_r. Returns, per true path, the estimate index or -1.
std::vector<int> associate_paths(const std::vector<PathParams>& truth,
                                 std::span<const PathEstimate> estimates, int N_r);

struct SweepPoint {
  double sweep_value = 0.0;
  double ber = 0.0;
  double ber_awgn_ref = 0.0;
  double rmse_hz = 0.0;
  double mcrlb_hz = 0.0;
  int trials = 0;
  int frame_failures = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  /// Per-frame records, filled only when diagnostics are requested.
  std::vector<std::pair<double, TrialOutcome>> diagnostics;
};

/// Worker count from DOAOFDM_THREADS, else the hardware concurrency.
unsigned worker_threads();

SweepResult run_ber_vs_snr(const ExperimentConfig& cfg, const TrialContext& ctx,
                           bool diagnostics = false);
SweepResult run_ber_vs_speed(const ExperimentConfig& cfg, const TrialContext& ctx,
                             bool diagnostics = false);
SweepResult run_rmse_vs_snr(const ExperimentConfig& cfg, const TrialContext& ctx,
                            bool diagnostics = false);

/// Weighted MCRLB (Hz^2) of the average-power scenario at one speed and SNR.
double scenario_mcrlb(const ExperimentConfig& cfg, const ComplexVec& pilot, double snr_db);

/// Q(sqrt(N_r snr)).
double awgn_reference_ber(double snr_db, int N_r);

void write_sweep_csv(std::ostream& os, const SweepResult& result);
void write_diagnostics_csv(std::ostream& os, const SweepResult& result);

struct AccountingReport {
  int continuous_frame_symbols = 0;   ///< floor(coherence / T')
  double continuous_overhead = 0.0;   ///< 1 / that
  int short_frame_symbols = 0;        ///< floor(frame / T')
  double short_frame_overhead = 0.0;
  int window = 0;
  int paths = 0;
  double complexity_projection = 0.0;  ///< N K P M N_r
  double complexity_fft = 0.0;         ///< N K P M log2 M
  double latency_s = 0.0;              ///< K T'
};

AccountingReport accounting(const ExperimentConfig& cfg);
void write_accounting(std::ostream& os, const AccountingReport& report,
                      const ExperimentConfig& cfg);

struct TrainingSummary {
  TrainingReport report;
  double test_correlation = 0.0;
  double test_nrmse = 0.0;  ///< RMSE of nu / nu_max on the held-out set
};

/// Trains the regressor with the configured recipe and scores it on a fresh
/// fixed-SNR test set.
TrainingSummary train_and_evaluate(const ExperimentConfig& cfg, const ComplexVec& pilot);
void write_training_csv(std::ostream& os, const TrainingSummary& summary);

}  // namespace doaofdm
