#include "doaofdm/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "doaofdm/errors.hpp"

namespace doaofdm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Enumerations

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::BerVsSnr: return "ber_vs_snr";
    case ExperimentKind::BerVsSpeed: return "ber_vs_speed";
    case ExperimentKind::RmseVsSnr: return "rmse_vs_snr";
    case ExperimentKind::TrainFnn: return "train_fnn";
    case ExperimentKind::Accounting: return "accounting";
  }
  return "?";
}

std::string to_string(InitMethod method) {
  switch (method) {
    case InitMethod::Zd: return "zd";
    case InitMethod::Evm: return "evm";
    case InitMethod::Dl: return "dl";
    case InitMethod::PerfectCsi: return "perfect_csi";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::BerVsSnr, ExperimentKind::BerVsSpeed, ExperimentKind::RmseVsSnr,
                 ExperimentKind::TrainFnn, ExperimentKind::Accounting}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("experiment: unknown kind '" + s + "'");
}

InitMethod parse_init_method(const std::string& s) {
  for (auto m : {InitMethod::Zd, InitMethod::Evm, InitMethod::Dl, InitMethod::PerfectCsi}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("init: unknown method '" + s + "' (expected zd, evm, dl or perfect_csi)");
}

namespace {

std::string ipi_name(IpiModel m) {
  return m == IpiModel::Unnormalized ? "unnormalized" : "array_normalized";
}

IpiModel parse_ipi(const std::string& s) {
  if (s == "unnormalized") return IpiModel::Unnormalized;
  if (s == "array_normalized") return IpiModel::ArrayNormalized;
  throw ConfigError("bound_ipi: expected unnormalized or array_normalized, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Flat key table shared by the parser and the serializer

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, const json&)> read;
  std::function<json(const ExperimentConfig&)> write;
};

template <typename T, typename Get>
Key field(const char* name, Get get) {
  return Key{name, [get](ExperimentConfig& c, const json& j) { get(c) = j.get<T>(); },
             [get](const ExperimentConfig& c) {
               return json(get(const_cast<ExperimentConfig&>(c)));
             }};
}

#define DOAOFDM_FIELD(T, name, member) \
  field<T>(name, [](ExperimentConfig& c) -> T& { return c.member; })

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"experiment",
          [](ExperimentConfig& c, const json& j) {
            c.kind = parse_experiment_kind(j.get<std::string>());
          },
          [](const ExperimentConfig& c) { return json(to_string(c.kind)); }},
      Key{"init",
          [](ExperimentConfig& c, const json& j) {
            c.init = parse_init_method(j.get<std::string>());
          },
          [](const ExperimentConfig& c) { return json(to_string(c.init)); }},
      Key{"bound_ipi",
          [](ExperimentConfig& c, const json& j) { c.bound_ipi = parse_ipi(j.get<std::string>()); },
          [](const ExperimentConfig& c) { return json(ipi_name(c.bound_ipi)); }},
      DOAOFDM_FIELD(std::vector<double>, "sweep", sweep),
      DOAOFDM_FIELD(double, "v_max_kmh", v_max_kmh),
      DOAOFDM_FIELD(double, "snr_db", snr_db),
      DOAOFDM_FIELD(int, "trials", trials),
      DOAOFDM_FIELD(std::uint64_t, "seed", seed),
      DOAOFDM_FIELD(double, "fc_hz", ofdm.fc),
      DOAOFDM_FIELD(int, "M", ofdm.M),
      DOAOFDM_FIELD(int, "N", ofdm.N),
      DOAOFDM_FIELD(double, "delta_f_hz", ofdm.delta_f),
      DOAOFDM_FIELD(double, "T_cp_s", ofdm.T_cp),
      DOAOFDM_FIELD(int, "N_r", ofdm.N_r),
      DOAOFDM_FIELD(double, "P_T", ofdm.P_T),
      DOAOFDM_FIELD(int, "mod_order", ofdm.mod_order),
      DOAOFDM_FIELD(std::vector<double>, "path_theta_deg", path_theta_deg),
      DOAOFDM_FIELD(std::vector<double>, "path_tau_s", path_tau_s),
      DOAOFDM_FIELD(std::vector<double>, "path_power_db", path_power_db),
      DOAOFDM_FIELD(std::vector<double>, "doppler_hz", doppler_hz),
      DOAOFDM_FIELD(int, "cfar_training", estimator.cfar.training),
      DOAOFDM_FIELD(int, "cfar_guard", estimator.cfar.guard),
      DOAOFDM_FIELD(double, "cfar_pfa", estimator.cfar.pfa),
      DOAOFDM_FIELD(double, "cfar_scale_override", estimator.cfar.scale_override),
      DOAOFDM_FIELD(double, "angle_min_deg", estimator.angle_min_deg),
      DOAOFDM_FIELD(double, "angle_max_deg", estimator.angle_max_deg),
      DOAOFDM_FIELD(double, "angle_step_deg", estimator.angle_step_deg),
      DOAOFDM_FIELD(double, "delay_step_fraction", estimator.delay_step_fraction),
      DOAOFDM_FIELD(double, "sidelobe_guard_db", estimator.sidelobe_guard_db),
      DOAOFDM_FIELD(int, "window", window),
      DOAOFDM_FIELD(double, "evm_span_hz", evm_span_hz),
      DOAOFDM_FIELD(double, "evm_step_hz", evm_step_hz),
      DOAOFDM_FIELD(std::size_t, "training_samples", training.samples),
      DOAOFDM_FIELD(double, "training_train_fraction", training.train_fraction),
      DOAOFDM_FIELD(double, "training_tau_max_s", training.tau_max),
      DOAOFDM_FIELD(double, "training_nu_max_hz", training.nu_max),
      DOAOFDM_FIELD(double, "training_snr_min_db", training.snr_min_db),
      DOAOFDM_FIELD(double, "training_snr_max_db", training.snr_max_db),
      DOAOFDM_FIELD(std::size_t, "training_batch", training.batch),
      DOAOFDM_FIELD(double, "training_learning_rate", training.learning_rate),
      DOAOFDM_FIELD(int, "training_lr_decay_every", training.lr_decay_every),
      DOAOFDM_FIELD(double, "training_lr_decay_factor", training.lr_decay_factor),
      DOAOFDM_FIELD(int, "training_epochs", training.epochs),
      DOAOFDM_FIELD(std::uint64_t, "training_seed", training.seed),
      DOAOFDM_FIELD(std::vector<int>, "training_hidden", training.hidden),
      DOAOFDM_FIELD(bool, "training_normalize_by_gain", training.normalize_by_gain),
      DOAOFDM_FIELD(std::size_t, "test_samples", test_samples),
      DOAOFDM_FIELD(double, "test_snr_db", test_snr_db),
      DOAOFDM_FIELD(double, "coherence_time_s", coherence_time_s),
      DOAOFDM_FIELD(double, "frame_time_s", frame_time_s),
      DOAOFDM_FIELD(std::string, "model_path", model_path),
      DOAOFDM_FIELD(std::string, "output_path", output_path),
  };
  return table;
}

#undef DOAOFDM_FIELD

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

std::string with_line(int line, const std::string& msg) {
  return line > 0 ? "line " + std::to_string(line) + ": " + msg : msg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw ConfigError(key + ": " + msg);
  };
  if (trials < 1) fail("trials", "must be >= 1");
  if (sweep.empty() && (kind == ExperimentKind::BerVsSnr || kind == ExperimentKind::BerVsSpeed ||
                        kind == ExperimentKind::RmseVsSnr)) {
    fail("sweep", "must not be empty");
  }
  if (kind == ExperimentKind::BerVsSpeed) {
    for (double v : sweep) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail("sweep", "speeds must be finite and >= 0");
    }
  } else {
    for (double s : sweep) {
      if (!std::isfinite(s)) fail("sweep", "SNR points must be finite");
    }
  }
  if (!(v_max_kmh >= 0.0) || !std::isfinite(v_max_kmh)) fail("v_max_kmh", "must be >= 0");
  if (!std::isfinite(snr_db)) fail("snr_db", "must be finite");
  try {
    ofdm.validate();
  } catch (const std::exception& e) {
    fail("ofdm", e.what());
  }
  if (path_theta_deg.empty()) fail("path_theta_deg", "needs at least one path");
  if (path_tau_s.size() != path_theta_deg.size()) {
    fail("path_tau_s", "must have one entry per path");
  }
  if (path_power_db.size() != path_theta_deg.size()) {
    fail("path_power_db", "must have one entry per path");
  }
  for (double t : path_theta_deg) {
    if (!(std::abs(t) < 90.0)) fail("path_theta_deg", "angles must lie in (-90, 90)");
  }
  for (double t : path_tau_s) {
    if (!(t >= 0.0 && t <= ofdm.T_cp)) fail("path_tau_s", "delays must lie in [0, T_cp]");
  }
  for (double p : path_power_db) {
    if (!std::isfinite(p)) fail("path_power_db", "must be finite");
  }
  if (!doppler_hz.empty() && doppler_hz.size() != path_theta_deg.size()) {
    fail("doppler_hz", "must be empty or have one entry per path");
  }
  try {
    estimator.validate();
  } catch (const std::exception& e) {
    fail("estimator", e.what());
  }
  if (window != 0 && (window < 2 || ofdm.N < window + 2)) {
    fail("window", "must be 0 (automatic) or in [2, N-2]");
  }
  if (evm_span_hz < 0.0) fail("evm_span_hz", "must be >= 0");
  if (!(evm_step_hz > 0.0)) fail("evm_step_hz", "must be positive");
  try {
    training.validate();
  } catch (const std::exception& e) {
    fail("training", e.what());
  }
  if (test_samples < 2) fail("test_samples", "must be >= 2");
  if (!(coherence_time_s > 0.0)) fail("coherence_time_s", "must be positive");
  if (!(frame_time_s > 0.0)) fail("frame_time_s", "must be positive");
}

ScenarioSpec ExperimentConfig::scenario(double v, double snr) const {
  ScenarioSpec s;
  s.paths.clear();
  for (std::size_t p = 0; p < path_theta_deg.size(); ++p) {
    s.paths.push_back({path_theta_deg[p] * kPi / 180.0, path_tau_s[p], path_power_db[p]});
  }
  s.v_max_kmh = v;
  s.snr_db = snr;
  s.doppler_hz = doppler_hz;
  return s;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    cfg.validate();
    return cfg;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(with_line(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0),
                                std::string("malformed JSON: ") + e.what()));
  }
  if (!j.is_object()) throw ConfigError("line 1: configuration must be a JSON object");
  for (const auto& [name, value] : j.items()) {
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Key& k) { return name == k.name; });
    if (it == table.end()) {
      throw ConfigError(with_line(line_of_key(text, name), "unknown key '" + name + "'"));
    }
    try {
      it->read(cfg, value);
    } catch (const json::exception& e) {
      throw ConfigError(with_line(line_of_key(text, name),
                                  "bad value for '" + name + "': " + e.what()));
    } catch (const ConfigError& e) {
      throw ConfigError(with_line(line_of_key(text, name), e.what()));
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(':'));
    throw ConfigError(with_line(line_of_key(text, key), msg));
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& k : keys()) j[k.name] = k.write(cfg);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Trials

std::uint64_t trial_seed(std::uint64_t base, std::size_t point, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(trial >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<int> associate_paths(const std::vector<PathParams>& truth,
                                 std::span<const PathEstimate> estimates, int N_r) {
  const double lobe = 2.0 / N_r;
  std::vector<int> match(truth.size(), -1);
  for (std::size_t p = 0; p < truth.size(); ++p) {
    double best = lobe;
    for (std::size_t e = 0; e < estimates.size(); ++e) {
      const double dist = std::abs(std::sin(truth[p].theta) - std::sin(estimates[e].theta_hat));
      if (dist < best) {
        best = dist;
        match[p] = static_cast<int>(e);
      }
    }
  }
  return match;
}

namespace {

int tracking_window(const ExperimentConfig& cfg, double v_max_kmh) {
  if (cfg.window > 0) return cfg.window;
  return window_length(doppler_spread(v_max_kmh, cfg.ofdm.fc), cfg.ofdm.T_prime(), cfg.ofdm.N);
}

std::uint64_t count_bit_errors(const std::vector<Bits>& sent, const std::vector<Bits>& got) {
  if (sent.size() != got.size()) throw DimensionError("decoded symbol count mismatch");
  std::uint64_t errors = 0;
  for (std::size_t n = 0; n < sent.size(); ++n) {
    if (sent[n].size() != got[n].size()) throw DimensionError("decoded bit count mismatch");
    for (std::size_t i = 0; i < sent[n].size(); ++i) errors += sent[n][i] != got[n][i];
  }
  return errors;
}

}  // namespace

TrialOutcome run_trial(const ExperimentConfig& cfg, const TrialContext& ctx, double v_max_kmh,
                       double snr_db, std::uint64_t seed) {
  const OfdmConfig& oc = cfg.ofdm;
  std::mt19937_64 rng(seed);
  const ChannelRealization channel = draw_channel(oc, cfg.scenario(v_max_kmh, snr_db), rng);
  std::vector<Bits> data;
  for (int n = 2; n <= oc.N; ++n) {
    data.push_back(random_bits(static_cast<std::size_t>(oc.M * oc.bits_per_symbol()), rng));
  }
  const GeneratedFrame gen = generate_frame(ctx.pilot, data, channel, oc, rng);

  TrialOutcome out;
  for (const auto& p : channel.paths) out.nu_true.push_back(p.nu);

  DecodedFrame decoded;
  if (cfg.init == InitMethod::PerfectCsi) {
    decoded = detect_with_known_channel(gen.frame, channel);
    out.nu_hat = out.nu_true;
    out.paths_detected = static_cast<int>(channel.paths.size());
  } else {
    std::vector<PathEstimate> est;
    try {
      est = estimate_paths(gen.frame.symbol(1), ctx.pilot, oc, cfg.estimator);
    } catch (const NoPathsDetected& e) {
      out.failed = true;
      out.failure = e.what();
      return out;
    }
    const double sigma_nu = doppler_spread(v_max_kmh, oc.fc);
    std::vector<double> grid;
    if (cfg.init == InitMethod::Evm) {
      grid = doppler_grid(cfg.evm_span_hz > 0.0 ? cfg.evm_span_hz : sigma_nu, cfg.evm_step_hz);
    }
    for (auto& e : est) {
      switch (cfg.init) {
        case InitMethod::Zd: e.nu_hat = init_zero(); break;
        case InitMethod::Evm:
          e.nu_hat = init_evm(angle_mf(gen.frame.symbol(1), e.theta_hat), e.tau_hat, e.alpha_hat,
                              ctx.pilot, oc, grid);
          break;
        case InitMethod::Dl:
          if (!ctx.model) throw ConfigError("init dl requires a trained model (--model)");
          e.nu_hat = init_dl(*ctx.model, angle_mf(gen.frame.symbol(1), e.theta_hat),
                             e.alpha_hat, oc.P_T);
          break;
        case InitMethod::PerfectCsi: break;
      }
    }
    out.paths_detected = static_cast<int>(est.size());
    out.window = tracking_window(cfg, v_max_kmh);
    try {
      decoded = detect_frame(gen.frame, est, out.window);
    } catch (const TrackingFailure& e) {
      out.failed = true;
      out.failure = e.what();
      return out;
    }
    for (std::size_t i = 0; i < est.size(); ++i) est[i].nu_hat = decoded.nu_hat[i];
    const auto match = associate_paths(channel.paths, est, oc.N_r);
    for (int m : match) out.nu_hat.push_back(m < 0 ? 0.0 : est[static_cast<std::size_t>(m)].nu_hat);
  }

  out.bit_errors = count_bit_errors(data, decoded.bits);
  for (const auto& b : data) out.bits += b.size();
  out.clamped_gains = decoded.clamped_gains;
  out.nu_trajectory = decoded.nu_trajectory;
  const double norm = channel.gain_norm_sq();
  for (std::size_t p = 0; p < channel.paths.size(); ++p) {
    const double err = out.nu_true[p] - out.nu_hat[p];
    out.weighted_sq_error += std::norm(channel.paths[p].alpha) * err * err / norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

unsigned worker_threads() {
  if (const char* env = std::getenv("DOAOFDM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double awgn_reference_ber(double snr_db, int N_r) {
  return q_function(std::sqrt(N_r * db_to_linear(snr_db)));
}

double scenario_mcrlb(const ExperimentConfig& cfg, const ComplexVec& pilot, double snr_db) {
  ChannelRealization avg;
  double total = 0.0;
  for (std::size_t p = 0; p < cfg.path_theta_deg.size(); ++p) {
    PathParams path;
    path.theta = cfg.path_theta_deg[p] * kPi / 180.0;
    path.tau = cfg.path_tau_s[p];
    path.avg_power = db_to_linear(cfg.path_power_db[p]);
    path.alpha = std::sqrt(path.avg_power);
    total += path.avg_power;
    avg.paths.push_back(path);
  }
  avg.sigma2 = total * cfg.ofdm.P_T / db_to_linear(snr_db);
  BoundOptions opt;
  opt.ipi = cfg.bound_ipi;
  return mcrlb_weighted(avg, cfg.ofdm, pilot, opt);
}

namespace {

SweepResult sweep(const ExperimentConfig& cfg, const TrialContext& ctx, bool diagnostics,
                  bool speed_axis) {
  cfg.validate();
  SweepResult result;
  const unsigned workers = worker_threads();
  for (std::size_t point = 0; point < cfg.sweep.size(); ++point) {
    const double value = cfg.sweep[point];
    const double v = speed_axis ? value : cfg.v_max_kmh;
    const double snr = speed_axis ? cfg.snr_db : value;
    const auto start = std::chrono::steady_clock::now();

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
      for (std::size_t t = next++; t < outcomes.size(); t = next++) {
        try {
          outcomes[t] = run_trial(cfg, ctx, v, snr, trial_seed(cfg.seed, point, t));
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = outcomes.size();
        }
      }
    };
    const unsigned n_threads = std::min<unsigned>(workers, static_cast<unsigned>(cfg.trials));
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);

    SweepPoint pt;
    pt.sweep_value = value;
    pt.trials = cfg.trials;
    double sq = 0.0;
    int good = 0;
    for (const auto& o : outcomes) {
      if (o.failed) {
        ++pt.frame_failures;
      } else {
        pt.bit_errors += o.bit_errors;
        pt.bits += o.bits;
        sq += o.weighted_sq_error;
        ++good;
      }
      if (diagnostics) result.diagnostics.emplace_back(value, o);
    }
    pt.ber = pt.bits > 0 ? static_cast<double>(pt.bit_errors) / static_cast<double>(pt.bits)
                         : std::nan("");
    pt.rmse_hz = good > 0 ? std::sqrt(sq / good) : std::nan("");
    pt.ber_awgn_ref = awgn_reference_ber(snr, cfg.ofdm.N_r);
    pt.mcrlb_hz = std::sqrt(scenario_mcrlb(cfg, ctx.pilot, snr));
    pt.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.points.push_back(pt);
  }
  return result;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

SweepResult run_ber_vs_snr(const ExperimentConfig& cfg, const TrialContext& ctx,
                           bool diagnostics) {
  return sweep(cfg, ctx, diagnostics, false);
}

SweepResult run_ber_vs_speed(const ExperimentConfig& cfg, const TrialContext& ctx,
                             bool diagnostics) {
  return sweep(cfg, ctx, diagnostics, true);
}

SweepResult run_rmse_vs_snr(const ExperimentConfig& cfg, const TrialContext& ctx,
                            bool diagnostics) {
  return sweep(cfg, ctx, diagnostics, false);
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "sweep_value,ber,ber_awgn_ref,rmse_hz,mcrlb_hz,trials,frame_failures\n";
  for (const auto& p : result.points) {
    os << fmt(p.sweep_value) << ',' << fmt(p.ber) << ',' << fmt(p.ber_awgn_ref) << ','
       << fmt(p.rmse_hz) << ',' << fmt(p.mcrlb_hz) << ',' << p.trials << ',' << p.frame_failures
       << '\n';
  }
}

void write_diagnostics_csv(std::ostream& os, const SweepResult& result) {
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt(v[i]);
    return s;
  };
  os << "sweep_value,trial,failed,bit_errors,bits,paths_detected,window,clamped_gains,"
        "nu_true_hz,nu_hat_hz,nu_trajectory_hz\n";
  std::size_t trial = 0;
  double last = std::nan("");
  for (const auto& [value, o] : result.diagnostics) {
    if (!(value == last)) trial = 0;
    last = value;
    std::string traj;
    for (std::size_t w = 0; w < o.nu_trajectory.size(); ++w) {
      traj += (w ? "|" : "") + join(o.nu_trajectory[w]);
    }
    os << fmt(value) << ',' << trial++ << ',' << (o.failed ? 1 : 0) << ',' << o.bit_errors << ','
       << o.bits << ',' << o.paths_detected << ',' << o.window << ',' << o.clamped_gains << ','
       << join(o.nu_true) << ',' << join(o.nu_hat) << ',' << traj << '\n';
  }
}

// ---------------------------------------------------------------------------
// Accounting

AccountingReport accounting(const ExperimentConfig& cfg) {
  cfg.validate();
  const OfdmConfig& oc = cfg.ofdm;
  AccountingReport r;
  // A tiny tolerance keeps exact multiples of T' from flooring one symbol short.
  r.continuous_frame_symbols =
      static_cast<int>(std::floor(cfg.coherence_time_s / oc.T_prime() * (1.0 + 1e-12)));
  r.short_frame_symbols =
      static_cast<int>(std::floor(cfg.frame_time_s / oc.T_prime() * (1.0 + 1e-12)));
  if (r.continuous_frame_symbols < 1 || r.short_frame_symbols < 1) {
    throw ConfigError("coherence_time_s/frame_time_s: shorter than one OFDM symbol");
  }
  r.continuous_overhead = 1.0 / r.continuous_frame_symbols;
  r.short_frame_overhead = 1.0 / r.short_frame_symbols;
  r.window = tracking_window(cfg, cfg.v_max_kmh);
  r.paths = static_cast<int>(cfg.path_theta_deg.size());
  const double nkpm = double(oc.N) * r.window * r.paths * oc.M;
  r.complexity_projection = nkpm * oc.N_r;
  r.complexity_fft = nkpm * std::log2(double(oc.M));
  r.latency_s = r.window * oc.T_prime();
  return r;
}

void write_accounting(std::ostream& os, const AccountingReport& r, const ExperimentConfig& cfg) {
  const OfdmConfig& oc = cfg.ofdm;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "pilot_overhead_continuous: 1/%d = %.3f%% (coherence %.3f ms, T' = %.3f us)\n",
                r.continuous_frame_symbols, 100.0 * r.continuous_overhead,
                cfg.coherence_time_s * 1e3, oc.T_prime() * 1e6);
  os << buf;
  std::snprintf(buf, sizeof buf, "pilot_overhead_short_frame: 1/%d = %.3f%% (frame %.3f ms)\n",
                r.short_frame_symbols, 100.0 * r.short_frame_overhead, cfg.frame_time_s * 1e3);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "complexity: O(N K P M N_r) + O(N K P M log2 M) = %.0f + %.0f operations "
                "(N=%d, K=%d, P=%d, M=%d, N_r=%d)\n",
                r.complexity_projection, r.complexity_fft, oc.N, r.window, r.paths, oc.M,
                oc.N_r);
  os << buf;
  std::snprintf(buf, sizeof buf, "decoding_latency: K T' = %.3f us (K=%d, v_max=%g km/h)\n",
                r.latency_s * 1e6, r.window, cfg.v_max_kmh);
  os << buf;
}

// ---------------------------------------------------------------------------
// Regressor training

TrainingSummary train_and_evaluate(const ExperimentConfig& cfg, const ComplexVec& pilot) {
  cfg.validate();
  TrainingSummary s;
  s.report = fnn_train(cfg.training, pilot, cfg.ofdm);
  std::mt19937_64 rng(trial_seed(cfg.training.seed, 0xfe57, 0));
  const auto test = make_test_set(cfg.test_samples, cfg.test_snr_db, pilot, cfg.training,
                                  cfg.ofdm, rng);
  const Eigen::RowVectorXd pred = s.report.model.forward_normalized(test.X);
  const Eigen::ArrayXd a = pred.transpose().array() - pred.mean();
  const Eigen::ArrayXd b = test.y.transpose().array() - test.y.mean();
  s.test_correlation = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  s.test_nrmse = std::sqrt((pred - test.y).squaredNorm() / static_cast<double>(test.y.size()));
  return s;
}

void write_training_csv(std::ostream& os, const TrainingSummary& s) {
  os << "epoch,val_mse,best_val_mse\n";
  for (std::size_t e = 0; e < s.report.val_mse.size(); ++e) {
    os << e << ',' << fmt(s.report.val_mse[e]) << ',' << fmt(s.report.best_so_far[e]) << '\n';
  }
}

}  // namespace doaofdm
