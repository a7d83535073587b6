#include "doaofdm/doppler_init.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "doaofdm/errors.hpp"

namespace doaofdm {

double init_zero() { return 0.0; }

double evm_objective(double nu, const ComplexVec& y_p1, double tau_hat, cplx alpha_hat,
                     const ComplexVec& x_1, const OfdmConfig& cfg) {
  if (alpha_hat == cplx{}) throw ParameterError("evm_objective: alpha_hat is zero");
  if (y_p1.size() != cfg.M || x_1.size() != cfg.M) {
    throw DimensionError("evm_objective: expected length-M vectors");
  }
  const ComplexVec comp =
      dft(y_p1.cwiseProduct(doppler_phasor(nu, cfg.M, cfg.delta_tau()).conjugate()))
          .cwiseProduct(delay_phasor(tau_hat, cfg.M, cfg.delta_f).conjugate()) /
      (alpha_hat * std::sqrt(cfg.P_T));
  return (comp - x_1).squaredNorm() / cfg.M;
}

std::vector<double> doppler_grid(double span_hz, double step_hz) {
  if (!(step_hz > 0.0) || span_hz < 0.0) throw ParameterError("doppler_grid: bad span or step");
  const auto half = static_cast<long>(std::floor(span_hz / step_hz + 1e-9));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * half + 1));
  for (long i = -half; i <= half; ++i) grid.push_back(i * step_hz);
  return grid;
}

double init_evm(const ComplexVec& y_p1, double tau_hat, cplx alpha_hat, const ComplexVec& x_1,
                const OfdmConfig& cfg, std::span<const double> grid) {
  if (grid.empty()) throw ParameterError("init_evm: empty Doppler grid");
  double best_nu = grid.front();
  double best = std::numeric_limits<double>::infinity();
  for (double nu : grid) {
    const double e = evm_objective(nu, y_p1, tau_hat, alpha_hat, x_1, cfg);
    if (e < best || (e == best && std::abs(nu) < std::abs(best_nu))) {
      best = e;
      best_nu = nu;
    }
  }
  return best_nu;
}

// ---------------------------------------------------------------------------
// Dense regressor

FnnModel FnnModel::create(int M, std::span<const int> hidden, double nu_scale,
                          std::uint64_t seed) {
  if (M < 1) throw ParameterError("FnnModel: M must be >= 1");
  if (!(nu_scale > 0.0)) throw ParameterError("FnnModel: nu_scale must be positive");
  FnnModel model;
  model.M = M;
  model.nu_scale = nu_scale;
  std::mt19937_64 rng(seed);
  int in = 2 * M;
  std::vector<int> widths(hidden.begin(), hidden.end());
  widths.push_back(1);
  for (int out : widths) {
    if (out < 1) throw ParameterError("FnnModel: layer widths must be >= 1");
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) layer.W(r, c) = u(rng);
    }
    model.layers.push_back(std::move(layer));
    in = out;
  }
  return model;
}

void FnnModel::validate() const {
  if (layers.empty()) throw ParameterError("FnnModel: no layers");
  Eigen::Index in = input_width();
  for (const auto& l : layers) {
    if (l.W.cols() != in || l.b.size() != l.W.rows()) {
      throw ParameterError("FnnModel: layer dimensions do not chain");
    }
    if (!l.W.allFinite() || !l.b.allFinite()) throw ParameterError("FnnModel: non-finite weight");
    in = l.W.rows();
  }
  if (in != 1) throw ParameterError("FnnModel: head must have a single output");
}

Eigen::RowVectorXd FnnModel::forward_normalized(const Eigen::MatrixXd& X) const {
  if (X.rows() != input_width()) {
    throw DimensionError("FnnModel: input width " + std::to_string(X.rows()) + ", expected " +
                         std::to_string(input_width()));
  }
  Eigen::MatrixXd a = X;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Eigen::MatrixXd z = layers[i].W * a;
    z.colwise() += layers[i].b;
    a = (i + 1 < layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a.row(0);
}

std::size_t FnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'O', 'A', 'F', 'N', 'N', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

// The format is little-endian; this build assumes a little-endian host.
template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParameterError("model file truncated");
  return v;
}

}  // namespace

void FnnModel::save(const std::filesystem::path& path) const {
  validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(M));
  put<double>(os, nu_scale);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(input_width()));
  for (const auto& l : layers) put<std::uint32_t>(os, static_cast<std::uint32_t>(l.W.rows()));
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) put<double>(os, l.W(r, c));
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) put<double>(os, l.b[r]);
  }
  if (!os) throw ParameterError("write failed for " + path.string());
}

FnnModel FnnModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParameterError("cannot open model file " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw ParameterError(path.string() + " is not a model file");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw ParameterError("unsupported model file version " + std::to_string(version));
  }
  FnnModel model;
  model.M = static_cast<int>(get<std::uint32_t>(is));
  model.nu_scale = get<double>(is);
  const auto count = get<std::uint32_t>(is);
  if (count == 0 || count > 64) throw ParameterError("implausible layer count in model file");
  std::vector<std::uint32_t> widths(count + 1);
  for (auto& w : widths) w = get<std::uint32_t>(is);
  if (widths.front() != static_cast<std::uint32_t>(model.input_width())) {
    throw ParameterError("model input width does not match 2M");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    DenseLayer l{Eigen::MatrixXd(widths[i + 1], widths[i]), Eigen::VectorXd(widths[i + 1])};
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = get<double>(is);
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b[r] = get<double>(is);
    model.layers.push_back(std::move(l));
  }
  model.validate();
  return model;
}

double fnn_forward(const FnnModel& model, const Eigen::VectorXd& input) {
  return model.forward_normalized(input)(0) * model.nu_scale;
}

FnnGradient fnn_loss_and_gradient(const FnnModel& model, const Eigen::MatrixXd& X,
                                  const Eigen::RowVectorXd& target) {
  if (X.cols() != target.size()) throw DimensionError("gradient: batch and target sizes differ");
  const std::size_t L = model.layers.size();
  const double B = static_cast<double>(X.cols());

  // Keep every layer's input and pre-activation for the backward pass.
  std::vector<Eigen::MatrixXd> inputs(L), pre(L);
  Eigen::MatrixXd a = X;
  for (std::size_t i = 0; i < L; ++i) {
    inputs[i] = a;
    pre[i] = model.layers[i].W * a;
    pre[i].colwise() += model.layers[i].b;
    a = (i + 1 < L) ? Eigen::MatrixXd(pre[i].cwiseMax(0.0)) : pre[i];
  }
  const Eigen::RowVectorXd err = a.row(0) - target;

  FnnGradient out;
  out.loss = err.squaredNorm() / B;
  out.grads.resize(L);
  Eigen::MatrixXd delta = (2.0 / B) * err;
  for (std::size_t i = L; i-- > 0;) {
    out.grads[i].W = delta * inputs[i].transpose();
    out.grads[i].b = delta.rowwise().sum();
    if (i > 0) {
      delta = (model.layers[i].W.transpose() * delta)
                  .cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training data and training loop

void TrainingConfig::validate() const {
  if (samples < 2) throw ParameterError("training: need at least 2 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("training: train_fraction must lie in (0, 1)");
  }
  if (tau_max < 0.0 || !(nu_max > 0.0)) throw ParameterError("training: bad tau/nu support");
  if (snr_max_db < snr_min_db) throw ParameterError("training: snr range reversed");
  if (batch < 1 || epochs < 1) throw ParameterError("training: batch and epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("training: learning rate must be positive");
  if (lr_decay_every < 1 || !(lr_decay_factor > 0.0)) {
    throw ParameterError("training: bad step-size schedule");
  }
}

Eigen::VectorXd stack_real_imag(const ComplexVec& v) {
  Eigen::VectorXd out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

TrainingSample generate_training_sample(double tau, double nu, double snr, const ComplexVec& x_1,
                                        const TrainingConfig& tc, const OfdmConfig& cfg,
                                        std::mt19937_64& rng) {
  if (!(snr > 0.0)) throw ParameterError("generate_training_sample: snr must be positive");
  if (x_1.size() != cfg.M) throw DimensionError("generate_training_sample: pilot length != M");
  const ComplexVec clean = idft(x_1.cwiseProduct(delay_phasor(tau, cfg.M, cfg.delta_f)));
  ComplexVec y = clean.cwiseProduct(doppler_phasor(nu, cfg.M, cfg.delta_tau()));
  if (std::isfinite(snr)) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / snr));
    for (Eigen::Index q = 0; q < y.size(); ++q) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      y[q] += cplx(re, im);
    }
  }
  if (tc.normalize_by_gain) {
    const cplx g = clean.dot(y) / static_cast<double>(cfg.M);
    if (g != cplx{}) y /= g;
  }
  return {stack_real_imag(y), nu / tc.nu_max};
}

namespace {

TrainingDataset make_set(std::size_t count, const ComplexVec& x_1, const TrainingConfig& tc,
                         const OfdmConfig& cfg, std::mt19937_64& rng, double snr_lo,
                         double snr_hi) {
  std::uniform_real_distribution<double> tau_d(0.0, tc.tau_max);
  std::uniform_real_distribution<double> nu_d(-tc.nu_max, tc.nu_max);
  std::uniform_real_distribution<double> snr_d(snr_lo, snr_hi);
  TrainingDataset ds{Eigen::MatrixXd(2 * cfg.M, static_cast<Eigen::Index>(count)),
                     Eigen::RowVectorXd(static_cast<Eigen::Index>(count))};
  for (std::size_t i = 0; i < count; ++i) {
    const double tau = tau_d(rng);
    const double nu = nu_d(rng);
    const double snr_db = snr_lo == snr_hi ? snr_lo : snr_d(rng);
    auto s = generate_training_sample(tau, nu, db_to_linear(snr_db), x_1, tc, cfg, rng);
    ds.X.col(static_cast<Eigen::Index>(i)) = s.input;
    ds.y[static_cast<Eigen::Index>(i)] = s.target;
  }
  return ds;
}

double mse(const FnnModel& model, const TrainingDataset& ds) {
  const Eigen::RowVectorXd pred = model.forward_normalized(ds.X);
  return (pred - ds.y).squaredNorm() / static_cast<double>(ds.y.size());
}

struct AdamState {
  std::vector<DenseLayer> m, v;
  long step = 0;
};

}  // namespace

TrainingDataset make_training_set(std::size_t count, const ComplexVec& x_1,
                                  const TrainingConfig& tc, const OfdmConfig& cfg,
                                  std::mt19937_64& rng) {
  return make_set(count, x_1, tc, cfg, rng, tc.snr_min_db, tc.snr_max_db);
}

TrainingDataset make_test_set(std::size_t count, double snr_db, const ComplexVec& x_1,
                              const TrainingConfig& tc, const OfdmConfig& cfg,
                              std::mt19937_64& rng) {
  return make_set(count, x_1, tc, cfg, rng, snr_db, snr_db);
}

TrainingReport fnn_train(const TrainingConfig& tc, const ComplexVec& x_1, const OfdmConfig& cfg) {
  tc.validate();
  std::mt19937_64 rng(tc.seed);
  const auto n_train = static_cast<std::size_t>(std::llround(tc.samples * tc.train_fraction));
  if (n_train < 1 || n_train >= tc.samples) throw ParameterError("training: degenerate split");
  const auto train = make_training_set(n_train, x_1, tc, cfg, rng);
  const auto val = make_training_set(tc.samples - n_train, x_1, tc, cfg, rng);

  std::vector<int> hidden = tc.hidden;
  if (hidden.empty()) hidden = {cfg.M, cfg.M, cfg.M / 2, cfg.M / 2};
  FnnModel model = FnnModel::create(cfg.M, hidden, tc.nu_max, rng());

  AdamState adam;
  for (const auto& l : model.layers) {
    adam.m.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                      Eigen::VectorXd::Zero(l.b.size())});
  }
  adam.v = adam.m;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  TrainingReport report;
  report.initial_val_mse = mse(model, val);
  report.model = model;
  double best = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> order(n_train);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd Xb;
  Eigen::RowVectorXd yb;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.learning_rate * std::pow(tc.lr_decay_factor, epoch / tc.lr_decay_every);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n_train; start += tc.batch) {
      const std::size_t end = std::min(n_train, start + tc.batch);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Xb.resize(train.X.rows(), bs);
      yb.resize(bs);
      for (Eigen::Index j = 0; j < bs; ++j) {
        const Eigen::Index src = order[start + static_cast<std::size_t>(j)];
        Xb.col(j) = train.X.col(src);
        yb[j] = train.y[src];
      }
      const auto g = fnn_loss_and_gradient(model, Xb, yb);
      ++adam.step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
      for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
          m = beta1 * m + (1.0 - beta1) * grad;
          v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
          param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        };
        update(model.layers[i].W, adam.m[i].W, adam.v[i].W, g.grads[i].W);
        update(model.layers[i].b, adam.m[i].b, adam.v[i].b, g.grads[i].b);
      }
    }
    const double v = mse(model, val);
    if (!std::isfinite(v)) {
      throw TrainingDivergence("validation MSE became non-finite at epoch " +
                               std::to_string(epoch) + " (lr " + std::to_string(lr) + ")");
    }
    report.val_mse.push_back(v);
    if (v < best) {
      best = v;
      report.model = model;
      report.best_epoch = epoch;
    }
    report.best_so_far.push_back(best);
  }
  return report;
}

double init_dl(const FnnModel& model, const ComplexVec& y_p1, cplx alpha_hat, double P_T) {
  if (alpha_hat == cplx{}) throw ParameterError("init_dl: alpha_hat is zero");
  return fnn_forward(model, stack_real_imag(y_p1 / (alpha_hat * std::sqrt(P_T))));
}

}  // namespace doaofdm
