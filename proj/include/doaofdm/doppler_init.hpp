#pragma once

// Initial Doppler providers for the tracker: zero-Doppler, EVM grid search and a
// dense regression network operating on the gain-normalized pilot branch.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "doaofdm/signal_core.hpp"

namespace doaofdm {

double init_zero();

/// (1/M) || F[y .* c*(nu)] .* b*(tau_hat) / (alpha_hat sqrt(P_T)) - x_1 ||^2.
/// Throws ParameterError when alpha_hat is zero.
double evm_objective(double nu, const ComplexVec& y_p1, double tau_hat, cplx alpha_hat,
                     const ComplexVec& x_1, const OfdmConfig& cfg);

/// Symmetric Doppler grid [-span, span] with the given step.
std::vector<double> doppler_grid(double span_hz, double step_hz);

/// Grid argmin of the EVM objective; ties go to the smallest |nu|.
double init_evm(const ComplexVec& y_p1, double tau_hat, cplx alpha_hat, const ComplexVec& x_1,
                const OfdmConfig& cfg, std::span<const double> grid);

struct DenseLayer {
  Eigen::MatrixXd W;  ///< out x in
  Eigen::VectorXd b;
};

/// Dense regressor: ReLU hidden layers and a scalar linear head. The head output is
/// a Doppler normalized by nu_scale.
struct FnnModel {
  int M = 0;
  double nu_scale = 5e3;
  std::vector<DenseLayer> layers;

  /// Hidden widths are typically {M, M, M/2, M/2}; input width is 2M. Weights are
  /// He-uniform from the seed, biases zero.
  static FnnModel create(int M, std::span<const int> hidden, double nu_scale, std::uint64_t seed);

  int input_width() const { return 2 * M; }
  /// Throws ParameterError on a broken layer chain or non-finite parameter.
  void validate() const;
  /// Normalized outputs for a batch, one column per sample.
  Eigen::RowVectorXd forward_normalized(const Eigen::MatrixXd& X) const;
  std::size_t parameter_count() const;

  void save(const std::filesystem::path& path) const;
  static FnnModel load(const std::filesystem::path& path);
};

/// Doppler in Hz for one stacked input. Throws DimensionError on width mismatch.
double fnn_forward(const FnnModel& model, const Eigen::VectorXd& input);

/// Mean squared error over a batch (normalized units) and its gradient.
struct FnnGradient {
  double loss = 0.0;
  std::vector<DenseLayer> grads;
};
FnnGradient fnn_loss_and_gradient(const FnnModel& model, const Eigen::MatrixXd& X,
                                  const Eigen::RowVectorXd& target);

struct TrainingConfig {
  std::size_t samples = 50000;
  double train_fraction = 0.8;
  double tau_max = 5e-6;
  double nu_max = 5e3;
  double snr_min_db = 12.0;
  double snr_max_db = 18.0;
  std::size_t batch = 32;
  double learning_rate = 2e-3;
  int lr_decay_every = 10;
  double lr_decay_factor = 0.3;
  int epochs = 30;
  std::uint64_t seed = 1;
  /// Empty means {M, M, M/2, M/2}.
  std::vector<int> hidden;
  /// Divide each synthetic branch by its LS pilot gain, as the receiver does.
  bool normalize_by_gain = true;

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

/// Stack a complex vector as [re; im].
Eigen::VectorXd stack_real_imag(const ComplexVec& v);

struct TrainingSample {
  Eigen::VectorXd input;
  double target = 0.0;  ///< nu / nu_max
};

/// F^H(x_1 .* b(tau)) .* c(nu) + w, w ~ CN(0, I/snr), optionally gain-normalized.
TrainingSample generate_training_sample(double tau, double nu, double snr, const ComplexVec& x_1,
                                        const TrainingConfig& tc, const OfdmConfig& cfg,
                                        std::mt19937_64& rng);

struct TrainingDataset {
  Eigen::MatrixXd X;  ///< 2M x count
  Eigen::RowVectorXd y;
};

/// Draws count samples with tau, nu and SNR uniform over the configured supports.
TrainingDataset make_training_set(std::size_t count, const ComplexVec& x_1,
                                  const TrainingConfig& tc, const OfdmConfig& cfg,
                                  std::mt19937_64& rng);

/// Same as make_training_set but every sample at a fixed SNR (dB).
TrainingDataset make_test_set(std::size_t count, double snr_db, const ComplexVec& x_1,
                              const TrainingConfig& tc, const OfdmConfig& cfg,
                              std::mt19937_64& rng);

struct TrainingReport {
  FnnModel model;                 ///< best-validation snapshot
  double initial_val_mse = 0.0;   ///< before the first update
  std::vector<double> val_mse;    ///< per epoch
  std::vector<double> best_so_far;
  int best_epoch = -1;
};

/// Mini-batch Adam on the MSE loss with step decay and best-validation selection.
/// Throws TrainingDivergence if the validation loss becomes non-finite.
TrainingReport fnn_train(const TrainingConfig& tc, const ComplexVec& x_1, const OfdmConfig& cfg);

/// Regressor initialization from the pilot branch. Throws ParameterError if alpha_hat is zero.
double init_dl(const FnnModel& model, const ComplexVec& y_p1, cplx alpha_hat, double P_T);

}  // namespace doaofdm
