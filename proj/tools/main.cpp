#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "batchlab/ablation.hpp"
#include "batchlab/config.hpp"
#include "batchlab/covariance.hpp"
#include "batchlab/dataset.hpp"
#include "batchlab/distance.hpp"
#include "batchlab/error.hpp"
#include "batchlab/fit.hpp"
#include "batchlab/margin.hpp"
#include "batchlab/network.hpp"
#include "batchlab/random_walk.hpp"
#include "batchlab/ray_scan.hpp"
#include "batchlab/rng.hpp"
#include "batchlab/trainer.hpp"

namespace {

using namespace batchlab;

struct CommonOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "config file (defaults when omitted)");
  o.seed_opt = cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--out", o.out, "output directory override");
}

RunConfig resolved_config(const CommonOpts& o) {
  RunConfig cfg = o.config.empty() ? default_config() : parse_config(o.config);
  if (o.seed_opt && o.seed_opt->count() > 0) cfg.seed = o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  validate_config(cfg);
  return cfg;
}

std::string rung_label(const AblationFlags& f) {
  if (!f.large_batch) return f.mult_noise ? "SB+NOISE" : "SB";
  std::string s = "LB";
  if (f.lr_scale) s += "+LR";
  if (f.gbn) s += "+GBN";
  if (f.regime_adapt) s += "+RA";
  if (f.mult_noise) s += "+NOISE";
  return s;
}

void print_report(const RunReport& r) {
  std::printf("%-14s batch %-5zu lr %-10.6g epochs %-4zu iters %-6zu train_err %.4f",
              r.rung.c_str(), r.batch, r.lr, r.epochs, r.iterations,
              r.final_train_error);
  if (r.final_val_error >= 0.0) std::printf(" val_err %.4f", r.final_val_error);
  std::printf("  [%.1fs, inputs %016llx]\n", r.wall_seconds,
              static_cast<unsigned long long>(r.input_hash));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_entry(const Tensor& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

// Mean cross-entropy over the set, evaluated in fixed 512-row chunks.
double mean_eval_loss(Mlp& model, const Dataset& ds) {
  const Mode before = model.mode();
  model.set_mode(Mode::eval);
  const std::size_t chunk = 512;
  double sum = 0.0;
  for (std::size_t lo = 0; lo < ds.size(); lo += chunk) {
    const std::size_t hi = std::min(ds.size(), lo + chunk);
    Tensor x = Tensor::zeros({hi - lo, ds.dim()});
    std::vector<int> y(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < ds.dim(); ++j) x.at(i - lo, j) = ds.inputs.at(i, j);
      y[i - lo] = ds.labels[i];
    }
    const Tensor logits = model.forward(x, /*update_stats=*/false);
    const LossValue v = softmax_xent(logits, y, nullptr, nullptr);
    sum += v.value * static_cast<double>(hi - lo);
  }
  model.set_mode(before);
  return sum / static_cast<double>(ds.size());
}

int cmd_train(const CommonOpts& common) {
  RunConfig cfg = resolved_config(common);
  Dataset train, val;
  load_data(cfg.dataset, train, val);
  const std::string label = rung_label(cfg.ablation);
  std::shared_ptr<Mlp> model;
  RunReport report = run_single(cfg, label, train, val, cfg.out_dir, &model);
  save_checkpoint(*model, cfg.out_dir + "/" + label + "/checkpoint.bin");
  print_report(report);
  std::printf("wrote %s, %s, %s/%s/checkpoint.bin\n", report.epochs_csv.c_str(),
              report.distance_csv.c_str(), cfg.out_dir.c_str(), label.c_str());
  return 0;
}

int cmd_ablate(const CommonOpts& common) {
  RunConfig cfg = resolved_config(common);
  std::vector<RunReport> reports = run_ablation(cfg);
  for (const RunReport& r : reports) print_report(r);
  std::printf("wrote %s/summary.csv\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_cov_verify(const std::string& out, std::size_t draws, std::uint64_t seed) {
  static const BatchModel models[] = {BatchModel::independent_selectors,
                                      BatchModel::iid_draws, BatchModel::subsets};
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw IoError("cov-verify: cannot open " + out);
  csv << "mode,N,M,P,max_abs_err_enum,max_abs_err_mc,max_std_err\n";
  char buf[32];
  Rng root(seed);
  std::size_t rows = 0;
  std::uint64_t tag = 0;
  for (BatchModel model : models) {
    for (std::size_t n : {4u, 6u, 8u}) {
      for (std::size_t m : {1u, 2u, 4u}) {
        for (std::size_t p : {1u, 2u, 3u}) {
          Rng pop_rng = root.child(++tag);
          Tensor per_sample = Tensor::zeros({n, p});
          for (std::size_t i = 0; i < n * p; ++i) per_sample[i] = pop_rng.normal();
          const GradientPopulation pop = GradientPopulation::make(per_sample);

          Tensor closed;
          if (model == BatchModel::independent_selectors) {
            closed = cov_with_replacement(pop, m);
          } else if (model == BatchModel::iid_draws) {
            // (C - g g^T) / M: i.i.d. draws shrink the centered second moment.
            closed = Tensor::zeros({p, p});
            for (std::size_t i = 0; i < p; ++i)
              for (std::size_t j = 0; j < p; ++j)
                closed.at(i, j) = (pop.second_moment.at(i, j) -
                                   pop.mean[i] * pop.mean[j]) /
                                  static_cast<double>(m);
          } else {
            closed = cov_without_replacement(pop, m);
          }

          const Tensor enumerated = enumerate_cov(pop, m, model);
          Rng mc_rng = root.child(++tag);
          const McCov mc = monte_carlo_cov(pop, m, model, draws, mc_rng);

          csv << to_string(model) << "," << n << "," << m << "," << p << ",";
          std::snprintf(buf, sizeof(buf), "%.17g", max_abs_diff(closed, enumerated));
          csv << buf << ",";
          std::snprintf(buf, sizeof(buf), "%.17g", max_abs_diff(closed, mc.cov));
          csv << buf << ",";
          std::snprintf(buf, sizeof(buf), "%.17g", max_entry(mc.std_err));
          csv << buf << "\n";
          ++rows;
        }
      }
    }
  }
  if (!csv) throw IoError("cov-verify: write failed for " + out);
  std::printf("wrote %s (%zu rows, %zu Monte-Carlo draws each)\n", out.c_str(), rows,
              draws);
  return 0;
}

int cmd_walk(const WalkConfig& wcfg, const std::string& out) {
  const DiffusionCurve curve = run_diffusion_experiment(wcfg);
  save_diffusion_csv(curve, out);
  std::printf("wrote %s (%zu checkpoints, %zu walkers, %s)\n", out.c_str(),
              curve.points.size(), wcfg.n_walkers, to_string(wcfg.dynamics));
  try {
    const DiffusionFit fit = estimate_diffusion_exponent(curve);
    std::printf("ln MSD ~ %.3f ln ln t (R2 %.4f) | MSD ~ t^%.4f (R2 %.4f) | %s\n",
                fit.p, fit.p_r2, fit.gamma, fit.gamma_r2,
                fit.prefers_power_law ? "power law fits better"
                                      : "polylog fits better");
  } catch (const FitError& e) {
    std::printf("exponent fit skipped: %s\n", e.what());
  }
  return 0;
}

int cmd_ray_scan(const std::string& checkpoint, std::size_t samples, double c,
                 std::size_t repeats, std::size_t bins, std::uint64_t seed,
                 std::uint64_t data_seed, const std::string& out) {
  Mlp model = load_checkpoint(checkpoint);
  const std::vector<std::size_t>& dims = model.config().dims;
  if (dims.front() != 784 || dims.back() != 10)
    throw ParameterError(
        "ray-scan: checkpoint must take 28x28 inputs and emit 10 classes to use "
        "the synthetic evaluation corpus");
  const Dataset ds = make_synthetic_images(data_seed, samples, 28, 10);

  ensure_dir(out);
  const Tensor w0 = model.params().w;
  const double loss0 = mean_eval_loss(model, ds);
  auto loss_at = [&](const Tensor& w) {
    model.params().w = w;
    return mean_eval_loss(model, ds);
  };
  Rng rng(seed);
  const std::vector<RayScanRecord> records = random_ray_scan(w0, loss_at, c, repeats, rng);
  model.params().w = w0;

  save_ray_csv(records, out + "/ray.csv");
  const std::vector<BinnedStd> binned = binned_loss_std(records, bins, loss0);
  save_binned_csv(binned, out + "/binned_std.csv");

  std::vector<double> centers, values;
  for (const BinnedStd& b : binned) {
    centers.push_back(b.center);
    values.push_back(b.value);
  }
  const LineFit line = fit_line(centers, values);
  std::printf("wrote %s/ray.csv and %s/binned_std.csv\n", out.c_str(), out.c_str());
  std::printf("loss(w0) %.6g | binned std ~ %.4g + %.4g r (R2 %.4f, %zu bins)\n",
              loss0, line.intercept, line.slope, line.r2, binned.size());
  return 0;
}

int cmd_logistic(std::size_t n, std::size_t dim, double margin, double lr,
                 std::uint64_t steps, std::size_t checkpoints, std::uint64_t seed,
                 const std::string& out) {
  Rng rng(seed);
  const SeparableDataset ds = make_separable(rng, n, dim, margin);
  const MarginTrace trace = run_margin_experiment(ds, lr, steps, checkpoints);
  save_margin_csv(trace, out);
  const MarginEntry& last = trace.entries.back();
  std::printf("wrote %s (%zu checkpoints)\n", out.c_str(), trace.entries.size());
  std::printf("oracle margin %.6g | t %llu: cosine %.6f, margin %.6g, |w|/ln t %.4f\n",
              trace.oracle_margin, static_cast<unsigned long long>(last.t),
              last.cosine, last.margin,
              last.norm / std::log(static_cast<double>(last.t)));
  return 0;
}

int cmd_fit(const std::string& in, double t_min, double t_max) {
  const DistanceSeries series = load_distance_csv(in);
  const LogFit fit = fit_log_distance(series, t_min, t_max);
  std::printf("d(t) = %.6g + %.6g ln t   R2 %.6f   (%zu points, window [%g, %g])\n",
              fit.a, fit.b, fit.r_squared, fit.n_points, fit.window_lo,
              fit.window_hi);
  std::printf("ln d ~ (2/alpha_hat) ln ln t with alpha_hat = %.4g\n", fit.alpha_hat);
  return 0;
}

int cmd_report(const std::string& in) {
  std::vector<RunReport> reports;
  for (const std::string& rung : ladder_rungs()) {
    const std::string dir = in + "/" + rung;
    if (!std::filesystem::exists(dir + "/epochs.csv")) continue;
    RunReport r;
    r.rung = rung;
    r.epoch_stats = load_epochs_csv(dir + "/epochs.csv");
    r.distance = load_distance_csv(dir + "/distance.csv");
    reports.push_back(std::move(r));
  }
  if (reports.empty())
    throw IoError("report: no rung outputs (<rung>/epochs.csv) under " + in);
  emit_charts(reports, in);
  std::printf("charts rebuilt under %s from %zu runs\n", in.c_str(), reports.size());
  std::ifstream summary(in + "/summary.csv", std::ios::binary);
  if (summary) {
    std::stringstream buf;
    buf << summary.rdbuf();
    std::fputs(buf.str().c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"large-batch training experiments: ablations, covariance checks, "
               "random-walk analogies"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults,
               "print the default config file and exit");

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "train a single configuration");
  add_common(train, train_opts);

  CommonOpts ablate_opts;
  CLI::App* ablate =
      app.add_subcommand("ablate", "run the SB/LB/+LR/+GBN/+RA ladder");
  add_common(ablate, ablate_opts);

  std::string cov_out = "cov_verify.csv";
  std::size_t cov_draws = 20000;
  std::uint64_t cov_seed = 123;
  CLI::App* cov = app.add_subcommand(
      "cov-verify", "closed-form vs enumerated vs Monte-Carlo batch covariance");
  cov->add_option("--out", cov_out, "output CSV path");
  cov->add_option("--draws", cov_draws, "Monte-Carlo draws per case")
      ->check(CLI::Range(std::size_t{1000}, std::size_t{100000000}));
  cov->add_option("--seed", cov_seed, "population seed");

  WalkConfig wcfg;
  std::string walk_kind = "lattice";
  std::string walk_out = "walk.csv";
  CLI::App* walk =
      app.add_subcommand("walk", "random walk in a quenched random potential");
  walk->add_option("--kind", walk_kind, "lattice | fourier")
      ->check(CLI::IsMember({"lattice", "fourier"}));
  walk->add_option("--walkers", wcfg.n_walkers, "ensemble size");
  walk->add_option("--tmax", wcfg.t_max, "steps per walker");
  walk->add_option("--checkpoints", wcfg.checkpoints, "log-spaced sample times");
  walk->add_option("--temp", wcfg.temperature, "temperature");
  walk->add_option("--seed", wcfg.seed, "disorder/walk seed");
  walk->add_option("--std", wcfg.increment_std, "lattice potential increment std");
  walk->add_option("--dim", wcfg.dim, "dimension (fourier)");
  walk->add_option("--alpha", wcfg.alpha, "structure exponent (fourier)");
  walk->add_option("--features", wcfg.features, "cosine features (fourier)");
  walk->add_option("--amplitude", wcfg.amplitude, "field amplitude (fourier)");
  walk->add_option("--fmin", wcfg.freq_min, "lowest frequency (fourier)");
  walk->add_option("--fmax", wcfg.freq_max, "highest frequency (fourier)");
  walk->add_option("--h", wcfg.step_size, "Langevin step size (fourier)");
  walk->add_option("--out", walk_out, "output CSV path");

  std::string ray_checkpoint, ray_out = ".";
  std::size_t ray_samples = 4096, ray_repeats = 1000, ray_bins = 20;
  double ray_c = 10.0;
  std::uint64_t ray_seed = 99, ray_data_seed = 1234;
  CLI::App* ray = app.add_subcommand(
      "ray-scan", "loss along random rays from a trained checkpoint");
  ray->add_option("--checkpoint", ray_checkpoint, "model checkpoint path")
      ->required();
  ray->add_option("--samples", ray_samples, "evaluation subset size");
  ray->add_option("--c", ray_c, "scan radius");
  ray->add_option("--repeats", ray_repeats, "number of rays");
  ray->add_option("--bins", ray_bins, "distance bins");
  ray->add_option("--seed", ray_seed, "ray seed");
  ray->add_option("--data-seed", ray_data_seed, "evaluation corpus seed");
  ray->add_option("--out", ray_out, "output directory");

  std::size_t log_n = 20, log_dim = 2, log_checkpoints = 40;
  double log_margin = 0.3, log_lr = 0.5;
  std::uint64_t log_steps = 100000, log_seed = 31;
  std::string log_out = "margin.csv";
  CLI::App* logistic = app.add_subcommand(
      "logistic", "gradient descent vs the max-margin separator");
  logistic->add_option("--n", log_n, "points");
  logistic->add_option("--dim", log_dim, "dimension (2 or 3)");
  logistic->add_option("--margin", log_margin, "construction margin");
  logistic->add_option("--lr", log_lr, "learning rate");
  logistic->add_option("--steps", log_steps, "gradient steps");
  logistic->add_option("--checkpoints", log_checkpoints, "log-spaced checkpoints");
  logistic->add_option("--seed", log_seed, "dataset seed");
  logistic->add_option("--out", log_out, "output CSV path");

  std::string fit_in;
  double fit_tmin = -1.0, fit_tmax = -1.0;
  CLI::App* fit = app.add_subcommand("fit", "log-distance law fit on a distance CSV");
  fit->add_option("--in", fit_in, "distance CSV (t,distance,train_loss,val_error)")
      ->required();
  fit->add_option("--tmin", fit_tmin, "window lower bound (t)");
  fit->add_option("--tmax", fit_tmax, "window upper bound (t)");

  std::string report_in;
  CLI::App* report =
      app.add_subcommand("report", "rebuild charts from an output directory");
  report->add_option("--in", report_in, "ablation output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (print_defaults) {
    std::fputs(serialize_config(default_config()).c_str(), stdout);
    return 0;
  }

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (ablate->parsed()) return cmd_ablate(ablate_opts);
    if (cov->parsed()) return cmd_cov_verify(cov_out, cov_draws, cov_seed);
    if (walk->parsed()) {
      wcfg.dynamics = walk_kind == "fourier" ? WalkDynamics::langevin_continuous
                                             : WalkDynamics::metropolis_lattice;
      return cmd_walk(wcfg, walk_out);
    }
    if (ray->parsed())
      return cmd_ray_scan(ray_checkpoint, ray_samples, ray_c, ray_repeats, ray_bins,
                          ray_seed, ray_data_seed, ray_out);
    if (logistic->parsed())
      return cmd_logistic(log_n, log_dim, log_margin, log_lr, log_steps,
                          log_checkpoints, log_seed, log_out);
    if (fit->parsed()) return cmd_fit(fit_in, fit_tmin, fit_tmax);
    if (report->parsed()) return cmd_report(report_in);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  std::fputs(app.help().c_str(), stdout);
  return 1;
}
