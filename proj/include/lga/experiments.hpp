#pragma once

// Experiment runners behind the command-line tool. Each runner writes its
// CSV files into an output directory and returns a list of named checks.
// run_experiment adds the resolved config, a manifest, and a JSON report.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "lga/config.hpp"
#include "lga/csv.hpp"
#include "lga/label_alignment.hpp"
#include "lga/linreg_lab.hpp"
#include "lga/metrics.hpp"
#include "lga/models.hpp"
#include "lga/numdiff.hpp"
#include "lga/synthdata.hpp"

namespace lga {

inline constexpr const char* kVersion = "0.1.0";

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::vector<CheckResult> checks;
  std::vector<std::string> files;
  /// Whether failed checks should fail the process.
  bool asserting = false;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

/// Mean and sample standard deviation, skipping NaN entries.
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  double sum = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    sum += x;
    ++out.count;
  }
  if (out.count == 0) return {std::nan(""), std::nan(""), 0};
  out.mean = sum / static_cast<double>(out.count);
  if (out.count > 1) {
    double ss = 0.0;
    for (double x : xs) {
      if (!std::isnan(x)) ss += (x - out.mean) * (x - out.mean);
    }
    out.std = std::sqrt(ss / static_cast<double>(out.count - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// learnspeed

inline const std::vector<std::string>& learnspeed_header() {
  static const std::vector<std::string> h{"k", "dim", "lambda_l", "lambda_u", "c"};
  return h;
}

/// Coordinate-wise learning progress c_k for a grid of labeled (one panel)
/// or unlabeled (other panel) eigenvalues, with b fixed within a panel.
/// Coordinates evolve independently, so each panel is one diagonal problem
/// with one coordinate per grid value.
inline ExperimentReport run_learnspeed(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& ls = cfg.learnspeed;
  ExperimentReport rep;
  rep.experiment = "learnspeed";
  std::vector<double> grid = ls.grid;
  std::sort(grid.begin(), grid.end());
  const auto m = static_cast<Eigen::Index>(grid.size());
  const Vector grid_vec = Eigen::Map<const Vector>(grid.data(), m);

  for (const char* panel : {"vary_lambda_l", "vary_lambda_u"}) {
    const bool vary_l = std::string(panel) == "vary_lambda_l";
    linreg::DiagonalProblem prob;
    prob.lambda_l = vary_l ? grid_vec : Vector::Constant(m, ls.lambda_fixed);
    prob.lambda_u = vary_l ? Vector::Constant(m, ls.lambda_fixed) : grid_vec;
    prob.b = Vector::Constant(m, ls.b);
    prob.n_l = std::max<std::size_t>(ls.n_l, grid.size());
    prob.n_u = std::max<std::size_t>(ls.n_u, grid.size());
    Rng rng = Rng(cfg.seed).substream("learnspeed").substream(panel);
    const auto design = linreg::make_diagonal_design(prob, rng);
    linreg::SimplifiedParams params{ls.lr_theta, ls.lr_w, ls.eps_norm, ls.k_max, ls.mode, ls.record_every};
    const auto traj = linreg::simplified_lga_run(prob, design, params);

    const std::string file = std::string("learnspeed_") + panel + ".csv";
    CsvWriter csv(out_dir / file, learnspeed_header());
    bool ordered = true;
    std::size_t checked_steps = 0;
    for (std::size_t s = 0; s < traj.k.size(); ++s) {
      for (Eigen::Index i = 0; i < m; ++i) {
        csv.row(traj.k[s], i, prob.lambda_l[i], prob.lambda_u[i], traj.c[s][i]);
      }
      if (traj.k[s] >= ls.window_begin && traj.k[s] <= ls.window_end) {
        ++checked_steps;
        for (Eigen::Index i = 0; i + 1 < m; ++i) ordered = ordered && traj.c[s][i] < traj.c[s][i + 1];
      }
    }
    rep.files.push_back(file);
    const double final_dev = (traj.c.back().array() - 1.0).abs().maxCoeff();
    rep.checks.push_back({std::string(panel) + "/ordered_in_window", ordered && checked_steps > 0,
                          static_cast<double>(checked_steps), 0.0,
                          "c strictly increasing in the varied eigenvalue for k in [" +
                              std::to_string(ls.window_begin) + ", " + std::to_string(ls.window_end) + "]"});
    rep.checks.push_back({std::string(panel) + "/converges_to_one", final_dev <= ls.converge_tol, final_dev,
                          ls.converge_tol, "max |c - 1| at k_max"});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// rings

inline const std::vector<std::string>& rings_records_header() {
  static const std::vector<std::string> h{"iteration", "trial",     "method",   "test_loss",
                                          "test_acc",  "alignment", "grad_dist"};
  return h;
}

struct RingsTrial {
  std::vector<TrainRecord> supervised;
  std::vector<TrainRecord> lga;
};

inline Mlp rings_model(const RunConfig& cfg) {
  MlpConfig mc;
  mc.input_dim = cfg.rings.dim;
  mc.hidden_dim = cfg.model.hidden_dim;
  mc.num_hidden_layers = cfg.model.num_hidden_layers;
  mc.output_dim = kRingsNumClasses;
  mc.loss = LossKind::kSoftmaxCrossEntropy;
  return Mlp(mc);
}

/// One trial: a fresh dataset and initialization, shared by both methods.
inline RingsTrial run_rings_trial(const RunConfig& cfg, std::size_t trial) {
  const Rng stream = Rng(cfg.seed).substream("rings").substream(static_cast<std::uint64_t>(trial));
  RingsConfig rc = cfg.rings;
  rc.seed = stream.substream("data").seed();
  const RingsData data = gen_rings(rc);
  const Mlp model = rings_model(cfg);
  Rng init = stream.substream("init");
  const Vector theta0 = model.init_params(init);
  LgaConfig lc = cfg.lga;
  lc.seed = stream.substream("train").seed();
  lc.label_param = LabelParam::kSoftmax;

  RingsTrial out;
  out.supervised = supervised_train(model, lc, data.labeled, &data.test, theta0).records;
  out.lga = lga_train(model, lc, data.labeled, data.unlabeled, &data.test, theta0).records;
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct RingsSummary {
  MeanStd final_acc[2];        // [supervised, lga]
  MeanStd final_loss[2];
  MeanStd late_alignment[2];   // per-trial mean over the second half of training
};

inline RingsSummary summarize_rings(const std::vector<RingsTrial>& trials, std::size_t iterations) {
  RingsSummary s;
  for (int method = 0; method < 2; ++method) {
    std::vector<double> acc, loss, align;
    for (const auto& t : trials) {
      const auto& recs = method == 0 ? t.supervised : t.lga;
      acc.push_back(recs.back().test_acc);
      loss.push_back(recs.back().test_loss);
      std::vector<double> late;
      for (const auto& r : recs) {
        if (2 * r.iteration > iterations) late.push_back(r.alignment);
      }
      align.push_back(mean_std(late).mean);
    }
    s.final_acc[method] = mean_std(acc);
    s.final_loss[method] = mean_std(loss);
    s.late_alignment[method] = mean_std(align);
  }
  return s;
}

/// Supervised baseline vs. label gradient alignment on the rings data over
/// cfg.trials independent trials.
inline ExperimentReport run_rings(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                  std::vector<RingsTrial>* trials_out = nullptr) {
  ExperimentReport rep;
  rep.experiment = "rings";
  std::vector<RingsTrial> trials(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) { trials[t] = run_rings_trial(cfg, t); });

  const char* names[2] = {"supervised", "lga"};
  {
    CsvWriter csv(out_dir / "rings_records.csv", rings_records_header());
    for (std::size_t t = 0; t < trials.size(); ++t) {
      for (int method = 0; method < 2; ++method) {
        for (const auto& r : method == 0 ? trials[t].supervised : trials[t].lga) {
          csv.row(r.iteration, t, names[method], r.test_loss, r.test_acc, r.alignment, r.grad_dist);
        }
      }
    }
    rep.files.push_back("rings_records.csv");
  }
  {
    CsvWriter csv(out_dir / "rings_summary.csv",
                  {"method", "iteration", "metric", "mean", "std", "trials"});
    for (int method = 0; method < 2; ++method) {
      const auto& first = method == 0 ? trials[0].supervised : trials[0].lga;
      for (std::size_t idx = 0; idx < first.size(); ++idx) {
        std::map<std::string, std::vector<double>> cols;
        for (const auto& t : trials) {
          const auto& r = (method == 0 ? t.supervised : t.lga)[idx];
          cols["test_loss"].push_back(r.test_loss);
          cols["test_acc"].push_back(r.test_acc);
          cols["alignment"].push_back(r.alignment);
          cols["grad_dist"].push_back(r.grad_dist);
        }
        for (const char* metric : {"test_loss", "test_acc", "alignment", "grad_dist"}) {
          const MeanStd ms = mean_std(cols[metric]);
          csv.row(names[method], first[idx].iteration, metric, ms.mean, ms.std, ms.count);
        }
      }
    }
    rep.files.push_back("rings_summary.csv");
  }
  const RingsSummary s = summarize_rings(trials, cfg.lga.iterations);
  {
    CsvWriter csv(out_dir / "rings_final.csv",
                  {"method", "final_test_acc_mean", "final_test_acc_std", "final_test_loss_mean",
                   "final_test_loss_std", "late_alignment_mean", "late_alignment_std", "trials"});
    for (int method = 0; method < 2; ++method) {
      csv.row(names[method], s.final_acc[method].mean, s.final_acc[method].std, s.final_loss[method].mean,
              s.final_loss[method].std, s.late_alignment[method].mean, s.late_alignment[method].std,
              trials.size());
    }
    rep.files.push_back("rings_final.csv");
  }
  rep.checks.push_back({"final_accuracy_lga_ge_supervised", s.final_acc[1].mean >= s.final_acc[0].mean,
                        s.final_acc[1].mean - s.final_acc[0].mean, 0.0, "mean(lga) - mean(supervised)"});
  rep.checks.push_back({"final_loss_lga_le_supervised", s.final_loss[1].mean <= s.final_loss[0].mean,
                        s.final_loss[1].mean - s.final_loss[0].mean, 0.0, "mean(lga) - mean(supervised)"});
  rep.checks.push_back({"late_alignment_lga_gt_supervised",
                        s.late_alignment[1].mean > s.late_alignment[0].mean,
                        s.late_alignment[1].mean - s.late_alignment[0].mean, 0.0,
                        "mean over second half of training, lga - supervised"});
  if (trials_out != nullptr) *trials_out = std::move(trials);
  return rep;
}

// ---------------------------------------------------------------------------
// propcheck

/// Random diagonal problem: eigenvalues in [0.5, 2], |b_i| in [0.5, 2] with
/// random sign.
inline linreg::DiagonalProblem random_diagonal_problem(Rng& rng, std::size_t m, std::size_t n_l,
                                                       std::size_t n_u) {
  linreg::DiagonalProblem p;
  const auto mm = static_cast<Eigen::Index>(m);
  p.lambda_l.resize(mm);
  p.lambda_u.resize(mm);
  p.b.resize(mm);
  for (Eigen::Index i = 0; i < mm; ++i) {
    p.lambda_l[i] = rng.uniform(0.5, 2.0);
    p.lambda_u[i] = rng.uniform(0.5, 2.0);
    p.b[i] = rng.uniform(0.5, 2.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
  p.n_l = n_l;
  p.n_u = n_u;
  return p;
}

inline const std::vector<std::string>& propcheck_independence_header() {
  static const std::vector<std::string> h{"mode",  "watched_dim", "side",      "perturbed_dim", "value",
                                          "deviation", "threshold", "expectation", "pass"};
  return h;
}

inline ExperimentReport run_propcheck(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& pc = cfg.propcheck;
  ExperimentReport rep;
  rep.experiment = "propcheck";
  rep.asserting = true;
  const Rng root = Rng(cfg.seed).substream("propcheck");
  Rng base_rng = root.substream("base");
  const auto base = random_diagonal_problem(base_rng, pc.dim, std::max(pc.n_l, pc.dim), std::max(pc.n_u, pc.dim));
  const std::uint64_t design_seed = root.substream("design").seed();

  CsvWriter csv(out_dir / "propcheck_independence.csv", propcheck_independence_header());
  for (auto mode : {linreg::NormMode::kStopGradient, linreg::NormMode::kFullNormalized}) {
    const linreg::SimplifiedParams params{pc.lr_theta, pc.lr_w, pc.eps_norm, pc.k_max, mode, 1};
    double worst = 0.0;
    std::size_t triples = 0;
    double weakest_control = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pc.dim; ++i) {
      for (std::size_t j = 0; j < pc.dim; ++j) {
        if (j == i) continue;
        for (auto side : {linreg::EigenSide::kLabeled, linreg::EigenSide::kUnlabeled}) {
          for (double value : pc.perturb_values) {
            const auto res = linreg::prop1_independence_check(base, i, {{side, j, value}}, params, design_seed);
            const double dev = res.max_deviation;
            worst = std::max(worst, dev);
            ++triples;
            csv.row(linreg::to_string(mode), i, side == linreg::EigenSide::kLabeled ? "labeled" : "unlabeled", j,
                    value, dev, pc.independence_tol, "independent", dev <= pc.independence_tol ? 1 : 0);
          }
        }
      }
      const double value = base.lambda_u[static_cast<Eigen::Index>(i)] * pc.control_factor;
      const auto ctrl = linreg::prop1_independence_check(
          base, i, {{linreg::EigenSide::kUnlabeled, i, value}}, params, design_seed);
      weakest_control = std::min(weakest_control, ctrl.max_deviation);
      csv.row(linreg::to_string(mode), i, "unlabeled", i, value, ctrl.max_deviation, pc.control_min_deviation,
              "expected-dependent", ctrl.max_deviation > pc.control_min_deviation ? 1 : 0);
    }
    rep.checks.push_back({"independence/" + linreg::to_string(mode), worst <= pc.independence_tol, worst,
                          pc.independence_tol,
                          std::to_string(triples) + " (watched, perturbed, value) triples"});
    rep.checks.push_back({"control/" + linreg::to_string(mode), weakest_control > pc.control_min_deviation,
                          weakest_control, pc.control_min_deviation,
                          "own-coordinate perturbation must change c"});
  }
  rep.files.push_back("propcheck_independence.csv");

  CsvWriter fp_csv(out_dir / "propcheck_fixed_point.csv",
                   {"problem", "dim", "n_l", "n_u", "converged", "iterations", "grad_inf", "theta_err_inf",
                    "max_abs_c_minus_1", "pass"});
  double worst_grad = 0.0, worst_theta = 0.0, worst_c = 0.0;
  bool all_converged = true;
  for (std::size_t p = 0; p < pc.fixed_point_problems; ++p) {
    Rng rng = root.substream("fixed_point").substream(static_cast<std::uint64_t>(p));
    const std::size_t m = 2 + rng.below(4);
    const std::size_t n_u = m + 1 + rng.below(m + 2);
    const std::size_t n_l = m + rng.below(3 * m + 1);
    const auto prob = random_diagonal_problem(rng, m, n_l, n_u);
    const auto design = linreg::make_diagonal_design(prob, rng);
    const linreg::SimplifiedParams params{pc.lr_theta, pc.lr_w, pc.eps_norm, pc.max_iters,
                                          linreg::NormMode::kFullNormalized, 0};
    const auto r = linreg::fixed_point_check(prob, design, params, pc.fixed_point_tol, pc.max_iters);
    const double cdev = (r.c.array() - 1.0).abs().maxCoeff();
    const bool pass = r.pass && cdev <= pc.c_tol;
    worst_grad = std::max(worst_grad, r.grad_inf);
    worst_theta = std::max(worst_theta, r.theta_err_inf);
    worst_c = std::max(worst_c, cdev);
    all_converged = all_converged && r.converged;
    fp_csv.row(p, m, n_l, n_u, r.converged ? 1 : 0, r.iterations, r.grad_inf, r.theta_err_inf, cdev, pass ? 1 : 0);
  }
  rep.files.push_back("propcheck_fixed_point.csv");
  rep.checks.push_back({"fixed_point/grad_inf", worst_grad <= pc.fixed_point_tol, worst_grad, pc.fixed_point_tol,
                        all_converged ? "all runs converged" : "some runs hit the iteration budget"});
  rep.checks.push_back({"fixed_point/theta_err_inf", worst_theta <= pc.fixed_point_tol, worst_theta,
                        pc.fixed_point_tol, "distance to the least-squares solution"});
  rep.checks.push_back({"fixed_point/c_equals_one", worst_c <= pc.c_tol, worst_c, pc.c_tol, "max |c - 1|"});
  return rep;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckErrors {
  double grad = 0.0;
  double jvp = 0.0;
  double contraction = 0.0;
  double hvp = 0.0;
};

/// Compares every analytic derivative of `model` at (theta, x, y) with a
/// central-difference estimate. Directions u, v are unit vectors.
template <DifferentiableModel M>
GradcheckErrors check_derivatives(const M& model, const Vector& theta, const Matrix& x, const Matrix& y,
                                  const Vector& u, const Vector& v) {
  GradcheckErrors e;
  const auto loss = [&](const Vector& t) { return model.loss(t, x, y); };
  e.grad = numdiff::relative_error(model.grad_theta(theta, x, y), numdiff::gradient(loss, theta));

  const auto logits = [&](const Vector& t) { return model.logits(t, x); };
  e.jvp = numdiff::relative_error(model.logit_jvp(theta, x, u), numdiff::directional(logits, theta, u));

  // grad_theta is affine in y, so a large step is exact up to roundoff.
  const auto contracted = [&](const Matrix& labels) {
    return model.grad_theta(theta, x, labels, LabelCheck::kAffine).dot(v);
  };
  e.contraction = numdiff::relative_error(model.grad_label_contraction(theta, x, v),
                                          numdiff::matrix_gradient(contracted, y, 1e-2));

  const auto grad = [&](const Vector& t) { return model.grad_theta(t, x, y); };
  e.hvp = numdiff::relative_error(model.hvp(theta, x, y, v), numdiff::directional(grad, theta, v));
  return e;
}

/// Row-stochastic matrix with random positive entries.
inline Matrix random_simplex_rows(Rng& rng, Eigen::Index n, Eigen::Index k) {
  Matrix y(n, k);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = std::exp(rng.normal());
  for (Eigen::Index i = 0; i < n; ++i) y.row(i) /= y.row(i).sum();
  return y;
}

/// Random model instance #index for derivative checks. Cycles through the
/// linear model, the cross-entropy MLP, and the squared-error MLP, keeping
/// p <= max_params and n <= max_rows. MLP inputs are redrawn until every
/// pre-activation is at least `kink_margin` away from zero.
inline GradcheckErrors gradcheck_instance(std::size_t index, Rng& rng, std::size_t max_params,
                                          std::size_t max_rows, double kink_margin = 1e-4) {
  const auto n = static_cast<Eigen::Index>(1 + rng.below(max_rows));
  auto unit = [&](std::size_t p) { return sample_unit_sphere(rng, p); };
  if (index % 3 == 0) {
    const std::size_t m = 1 + rng.below(std::min<std::size_t>(max_params, 12));
    LinearModel model(m);
    const Matrix x = rng.normal_matrix(n, static_cast<Eigen::Index>(m));
    const Matrix y = rng.normal_matrix(n, 1);
    const Vector theta = rng.normal_vector(static_cast<Eigen::Index>(m));
    return check_derivatives(model, theta, x, y, unit(m), unit(m));
  }
  MlpConfig mc;
  for (;;) {
    mc.input_dim = 1 + rng.below(6);
    mc.hidden_dim = 2 + rng.below(7);
    mc.num_hidden_layers = 1 + rng.below(3);
    mc.output_dim = 1 + rng.below(4);
    mc.loss = index % 3 == 1 ? LossKind::kSoftmaxCrossEntropy : LossKind::kMeanSquaredError;
    if (mc.loss == LossKind::kSoftmaxCrossEntropy && mc.output_dim < 2) mc.output_dim = 2;
    if (Mlp(mc).num_params() <= max_params) break;
  }
  const Mlp model(mc);
  const Vector theta = model.init_params(rng) + 0.1 * rng.normal_vector(static_cast<Eigen::Index>(model.num_params()));
  Matrix x = rng.normal_matrix(n, static_cast<Eigen::Index>(mc.input_dim));
  for (int tries = 0; model.min_abs_preactivation(theta, x) < kink_margin && tries < 1000; ++tries) {
    x = rng.normal_matrix(n, static_cast<Eigen::Index>(mc.input_dim));
  }
  const auto k = static_cast<Eigen::Index>(mc.output_dim);
  const Matrix y = mc.loss == LossKind::kSoftmaxCrossEntropy ? random_simplex_rows(rng, n, k) : rng.normal_matrix(n, k);
  return check_derivatives(model, theta, x, y, unit(model.num_params()), unit(model.num_params()));
}

/// Max relative error per derivative op over `instances` random instances.
inline GradcheckErrors gradcheck_sweep(std::uint64_t seed, std::size_t instances, std::size_t max_params,
                                       std::size_t max_rows) {
  GradcheckErrors worst;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = Rng(seed).substream("gradcheck").substream(static_cast<std::uint64_t>(i));
    const auto e = gradcheck_instance(i, rng, max_params, max_rows);
    worst.grad = std::max(worst.grad, e.grad);
    worst.jvp = std::max(worst.jvp, e.jvp);
    worst.contraction = std::max(worst.contraction, e.contraction);
    worst.hvp = std::max(worst.hvp, e.hvp);
  }
  return worst;
}

inline ExperimentReport run_gradcheck(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& gc = cfg.gradcheck;
  ExperimentReport rep;
  rep.experiment = "gradcheck";
  rep.asserting = true;
  const auto worst = gradcheck_sweep(cfg.seed, gc.instances, gc.max_params, gc.max_rows);
  CsvWriter csv(out_dir / "gradcheck.csv", {"op", "instances", "max_rel_error", "threshold", "pass"});
  const std::pair<const char*, std::pair<double, double>> rows[] = {
      {"grad_theta", {worst.grad, gc.tol_grad}},
      {"logit_jvp", {worst.jvp, gc.tol_jvp}},
      {"grad_label_contraction", {worst.contraction, gc.tol_contraction}},
      {"hvp", {worst.hvp, gc.tol_hvp}},
  };
  for (const auto& [op, vals] : rows) {
    const bool pass = vals.first <= vals.second;
    csv.row(op, gc.instances, vals.first, vals.second, pass ? 1 : 0);
    rep.checks.push_back({op, pass, vals.first, vals.second, "max relative error vs central differences"});
  }
  rep.files.push_back("gradcheck.csv");
  return rep;
}

// ---------------------------------------------------------------------------
// linreg-oracle

inline ExperimentReport run_linreg_oracle(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& lo = cfg.linreg_oracle;
  ExperimentReport rep;
  rep.experiment = "linreg-oracle";
  CsvWriter csv(out_dir / "linreg_oracle.csv",
                {"problem", "m", "n", "alpha", "k", "gd_closed_vs_iterative", "theta_star_vs_eigsum"});
  double worst_gd = 0.0, worst_star = 0.0;
  for (std::size_t p = 0; p < lo.problems; ++p) {
    Rng rng = Rng(cfg.seed).substream("linreg-oracle").substream(static_cast<std::uint64_t>(p));
    const std::size_t m = 1 + rng.below(lo.max_dim);
    const std::size_t n = m + rng.below(4 * m + 8);
    const Matrix x = rng.normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const Vector y = rng.normal_vector(static_cast<Eigen::Index>(n));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((x.transpose() * x) / static_cast<double>(n));
    const double alpha = rng.uniform(0.1, 0.95) / eig.eigenvalues().maxCoeff();
    const std::size_t k = 1 + rng.below(lo.max_k);
    const double gd = (linreg::gd_closed_form(x, y, alpha, k) - linreg::gd_iterate(x, y, alpha, k)).cwiseAbs().maxCoeff();
    double star = std::nan("");
    if (eig.eigenvalues().minCoeff() > 1e-8) {
      star = (linreg::theta_star(x, y) - linreg::theta_star_eigsum(x, y)).cwiseAbs().maxCoeff();
      worst_star = std::max(worst_star, star);
    }
    worst_gd = std::max(worst_gd, gd);
    csv.row(p, m, n, alpha, k, gd, star);
  }
  rep.files.push_back("linreg_oracle.csv");
  rep.checks.push_back({"gd_closed_form_matches_iterative", worst_gd <= lo.tol, worst_gd, lo.tol, "max-norm"});
  rep.checks.push_back({"theta_star_matches_eigsum", worst_star <= 1e-10, worst_star, 1e-10, "max-norm"});
  return rep;
}

// ---------------------------------------------------------------------------

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline Json report_json(const ExperimentReport& rep) {
  Json j;
  j["experiment"] = rep.experiment;
  j["passed"] = rep.passed();
  j["asserting"] = rep.asserting;
  Json checks = Json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value},
                      {"threshold", c.threshold}, {"detail", c.detail}});
  }
  j["checks"] = std::move(checks);
  return j;
}

/// Runs cfg.experiment into out_dir and writes config.json (fully
/// resolved), manifest.json, and report.json next to the CSVs.
inline ExperimentReport run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);
  write_json(out_dir / "config.json", to_json(cfg));
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport rep;
  if (cfg.experiment == "learnspeed") rep = run_learnspeed(cfg, out_dir);
  else if (cfg.experiment == "rings") rep = run_rings(cfg, out_dir);
  else if (cfg.experiment == "propcheck") rep = run_propcheck(cfg, out_dir);
  else if (cfg.experiment == "gradcheck") rep = run_gradcheck(cfg, out_dir);
  else rep = run_linreg_oracle(cfg, out_dir);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir / "report.json", report_json(rep));
  Json manifest{{"experiment", cfg.experiment},
                {"seed", cfg.seed},
                {"preset", cfg.preset},
                {"version", kVersion},
                {"wall_time_seconds", wall},
                {"files", rep.files}};
  write_json(out_dir / "manifest.json", manifest);
  return rep;
}

}  // namespace lga
