// Command-line front end for the experiment harness.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "doaofdm/errors.hpp"
#include "doaofdm/harness.hpp"

namespace {

using namespace doaofdm;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  bool verbose = false;
};

ExperimentConfig load(const Options& o, ExperimentKind kind) {
  ExperimentConfig cfg = o.config.empty() ? parse_config_text("") : parse_config(o.config);
  cfg.kind = kind;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_path = o.out;
  if (!o.model.empty()) cfg.model_path = o.model;
  if (kind == ExperimentKind::BerVsSpeed && o.config.empty()) {
    cfg.sweep = {100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0};
  }
  cfg.validate();
  return cfg;
}

// Writes to the configured output path, or stdout when none is set.
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open output file " + path);
  write(os);
}

int run_sweep(const Options& o, ExperimentKind kind) {
  const ExperimentConfig cfg = load(o, kind);
  TrialContext ctx{default_pilot(cfg.ofdm.M), std::nullopt};
  if (cfg.init == InitMethod::Dl) {
    if (cfg.model_path.empty()) throw ConfigError("init dl needs --model or model_path");
    ctx.model = FnnModel::load(cfg.model_path);
    if (ctx.model->M != cfg.ofdm.M) throw ConfigError("model was trained for a different M");
  }
  SweepResult r;
  switch (kind) {
    case ExperimentKind::BerVsSnr: r = run_ber_vs_snr(cfg, ctx, o.verbose); break;
    case ExperimentKind::BerVsSpeed: r = run_ber_vs_speed(cfg, ctx, o.verbose); break;
    default: r = run_rmse_vs_snr(cfg, ctx, o.verbose); break;
  }
  emit(cfg.output_path, [&](std::ostream& os) { write_sweep_csv(os, r); });
  if (o.verbose) {
    const std::string diag = cfg.output_path.empty() ? "diagnostics.csv"
                                                     : cfg.output_path + ".diag.csv";
    emit(diag, [&](std::ostream& os) { write_diagnostics_csv(os, r); });
    for (const auto& p : r.points) {
      std::fprintf(stderr, "point %g: %.2f s, %d failures\n", p.sweep_value, p.wall_seconds,
                   p.frame_failures);
    }
  }
  return 0;
}

int run_train(const Options& o) {
  const ExperimentConfig cfg = load(o, ExperimentKind::TrainFnn);
  if (cfg.model_path.empty()) throw ConfigError("train-fnn needs --model or model_path");
  const auto summary = train_and_evaluate(cfg, default_pilot(cfg.ofdm.M));
  summary.report.model.save(cfg.model_path);
  emit(cfg.output_path, [&](std::ostream& os) { write_training_csv(os, summary); });
  std::fprintf(stderr,
               "best epoch %d, validation MSE %.3e, test correlation %.5f, test nRMSE %.4f at "
               "%g dB\n",
               summary.report.best_epoch,
               summary.report.best_so_far.empty() ? 0.0 : summary.report.best_so_far.back(),
               summary.test_correlation, summary.test_nrmse, cfg.test_snr_db);
  return 0;
}

int run_accounting(const Options& o) {
  const ExperimentConfig cfg = load(o, ExperimentKind::Accounting);
  const auto report = accounting(cfg);
  emit(cfg.output_path, [&](std::ostream& os) { write_accounting(os, report, cfg); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DoA-aided SIMO-OFDM receiver experiments"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat JSON experiment configuration")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "base seed (overrides the config)");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
    sub->add_option("--model", o.model, "regressor model file");
    sub->add_flag("--verbose", o.verbose, "per-frame diagnostics and timing");
  };
  struct Sub {
    const char* name;
    const char* help;
    std::function<int()> run;
  };
  const Sub subs[] = {
      {"ber-snr", "BER against SNR at a fixed maximum speed",
       [&] { return run_sweep(o, ExperimentKind::BerVsSnr); }},
      {"ber-speed", "BER against maximum speed at a fixed SNR",
       [&] { return run_sweep(o, ExperimentKind::BerVsSpeed); }},
      {"rmse-snr", "weighted Doppler RMSE and bound against SNR",
       [&] { return run_sweep(o, ExperimentKind::RmseVsSnr); }},
      {"train-fnn", "train the Doppler regressor and save it to --model",
       [&] { return run_train(o); }},
      {"accounting", "pilot overhead, complexity and decoding latency",
       [&] { return run_accounting(o); }},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> registered;
  for (const auto& s : subs) registered.emplace_back(app.add_subcommand(s.name, s.help), &s);
  for (auto& [sub, s] : registered) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    for (auto& [sub, s] : registered) {
      if (sub->parsed()) return s->run();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
