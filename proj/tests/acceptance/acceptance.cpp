// Copyright 2026 The AirPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite. Prints one PASS/FAIL line per criterion; the process exits
// 0 once all nine verdicts are printed (use --strict to exit 1 on any FAIL).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "airpool/airpool.hpp"

using namespace airpool;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Verdict&)> body;
};

unsigned g_workers = 0;  // 0: available parallelism
const FeatureModel kGauss = FeatureModel::rectified_gaussian();

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return g;
}

// 1. Air latency against the quoted values.
void latency(Verdict& v) {
  SystemParams p;
  p.k_sensors = 12;
  p.n_features = 17911;
  p.bandwidth_hz = 10e6;
  const double air_ms = airpool_latency(p) * 1e3;
  v.detail << "L_air=" << air_ms << "ms";
  v.require(std::abs(air_ms - 1.7911) <= 5e-5, "L_air = 1.7911 ms");
  const double snr_db[] = {6.0, 10.0, 16.0};
  const double quoted[] = {22.90, 18.64, 14.47};
  for (int i = 0; i < 3; ++i) {
    const double ms = digital_latency(p, 6, db_to_linear(snr_db[i])) * 1e3;
    v.detail << " L_dig(" << snr_db[i] << "dB)=" << ms;
    v.require(std::abs(ms - quoted[i]) <= 0.05 * quoted[i], "digital latency within 5%");
  }
}

// 2. Zero-noise reconfigurability.
void reconfigurability(Verdict& v) {
  const std::size_t k = 12;
  SystemParams quiet;
  quiet.truncation_threshold = 0.0;
  FeatureMatrix f(k, 4096);
  Rng rng = make_rng(2, 1);
  sample_features_into(kGauss, f.data(), rng);
  const auto g = airpool_round(f, make_average_config(kGauss, k, 1.0, 0.0), quiet, 3);
  double worst = 0.0;
  for (std::size_t n = 0; n < f.cols(); ++n) {
    const double exact = true_pool(f.column(n), PoolingMode::average());
    if (exact > 0) worst = std::max(worst, std::abs(g[n] - exact) / exact);
  }
  v.detail << "average max rel err=" << worst;
  v.require(worst <= 1e-12, "average relative error <= 1e-12");

  const std::size_t trials = 100000;
  std::vector<double> err;
  for (double a : {2.0, 8.0, 64.0}) {
    const double beta = beta_star(kGauss, k, a, trials, derive_seed(2, 7), g_workers).beta;
    const AirPoolConfig c = make_max_config(kGauss, k, a, beta, 1.0, 0.0);
    const auto acc = monte_carlo<RunningStats>(trials, 21, g_workers, [&](Rng& r, RunningStats& s) {
      thread_local std::vector<double> col;
      col.resize(k);
      sample_features_into(kGauss, col, r);
      const double m = true_pool(col, PoolingMode::max());
      if (m > 0) s.add(std::abs(noiseless_pool(col, c) - m) / m);
    });
    err.push_back(acc.mean);
    v.detail << " max rel err(a=" << a << ")=" << acc.mean;
  }
  v.require(err[2] <= 0.02, "max mean relative error at alpha=64 <= 2%");
  v.require(err[2] < err[1] && err[1] < err[0], "error(64) < error(8) < error(2)");
}

// 3. Decomposition and bound validity over the (mode, alpha, SNR) grid.
void bound_suite(Verdict& v) {
  const std::size_t k = 12, trials = 100000;
  int failed_chan = 0, failed_appr = 0, failed_dec = 0, points = 0;
  std::ostringstream where;
  for (const PoolingMode& mode : {PoolingMode::average(), PoolingMode::max()}) {
    for (double a : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      for (double db : {0.0, 6.0, 12.0}) {
        const double p = db_to_linear(db);
        BruteForceOptions bf;
        bf.trials = trials;
        bf.beta_trials = trials;
        bf.seed = 3;
        bf.workers = g_workers;
        const AirPoolConfig c = config_for_alpha(kGauss, mode, k, a, p, 1.0, bf);
        const ErrorBreakdown e = estimate_errors(kGauss, c, k, trials, derive_seed(3, points), g_workers);
        ++points;
        const double delta = delta_bound(kGauss, a, p, 1.0);
        const bool chan = e.d_chan <= delta + 4 * e.std_errors[1];
        const bool appr = e.d_appr <= e.epsilon_bound + 4 * std::hypot(e.std_errors[2], e.epsilon_std_error);
        const bool dec = -e.decomposition_slack <= 4 * e.decomposition_slack_se;
        failed_chan += !chan;
        failed_appr += !appr;
        failed_dec += !dec;
        if (!chan || !appr || !dec) {
          where << ' ' << mode.name() << "/a=" << a << "/" << db << "dB";
          if (!dec) {
            where << "(excess " << -e.decomposition_slack / e.decomposition_slack_se << " SE)";
          }
        }
      }
    }
  }
  v.detail << points << " points; chan fails=" << failed_chan << " appr fails=" << failed_appr
           << " decomposition fails=" << failed_dec;
  if (!where.str().empty()) v.detail << " at" << where.str();
  v.require(failed_chan == 0, "d_chan <= delta + 4SE");
  v.require(failed_appr == 0, "d_appr <= epsilon + 4SE");
  v.require(failed_dec == 0, "d_total <= c0(d_chan + d_appr) + 4SE");
}

// 4. Large-alpha behavior of the noise surrogate.
void surrogate_asymptotics(Verdict& v) {
  const double r64 = delta_hat(64, 10, 1) / delta_bound(kGauss, 64, 10, 1);
  const double r8 = delta_hat(8, 10, 1) / delta_bound(kGauss, 8, 10, 1);
  const double slope = delta_hat_derivative(64, 10, 1) / (2.0 / std::numbers::e);
  v.detail << "dhat/delta(64)=" << r64 << " dhat/delta(8)=" << r8 << " slope/(2/e)=" << slope;
  v.require(std::abs(r64 - 1) <= 0.05, "ratio at 64 within 5%");
  v.require(std::abs(r64 - 1) < std::abs(r8 - 1), "ratio at 64 closer to 1 than at 8");
  v.require(std::abs(slope - 1) <= 0.05, "slope within 5% of 2/e");
}

// 5. Closed-form alpha near-optimality.
void closed_form(Verdict& v) {
  const std::size_t k = 12;
  const double e = max_second_moment(kGauss, k, 1000000, 5, g_workers).value;
  double prev_gap = std::numeric_limits<double>::infinity();
  BruteForceOptions bf;
  bf.trials = 100000;
  bf.beta_trials = 100000;
  bf.seed = 5;
  bf.workers = g_workers;
  BetaStarCache cache;
  bf.cache = &cache;
  const auto grid = default_alpha_grid();
  for (double snr : {1e2, 1e3, 1e4}) {
    const AlphaDecision d = alpha_closed_form(k, snr, 1.0, e);
    const auto root = stationarity_root(k, snr, 1.0, e);
    const double gap = root ? std::abs(d.alpha_star - *root) : std::numeric_limits<double>::infinity();
    v.detail << " snr=" << snr << ": a_cf=" << d.alpha_star << " a_root=" << (root ? *root : NAN);
    v.require(gap <= prev_gap, "gap nonincreasing");
    prev_gap = gap;
    if (snr < 1e3) continue;
    const double res = alpha_stationarity_residual(d.alpha_star, k, snr, 1.0, e);
    const double rhs = e * std::log(static_cast<double>(k)) / (d.alpha_star * d.alpha_star);
    const double rel = std::abs(res) / std::max(rhs, res + rhs);
    v.detail << " residual=" << rel;
    v.require(rel <= 0.10, "relative stationarity residual <= 10%");
    const AlphaDecision best = brute_force_alpha(kGauss, PoolingMode::max(), k, snr, 1.0, grid, bf);
    const AirPoolConfig c = config_for_alpha(kGauss, PoolingMode::max(), k, d.alpha_star, snr, 1.0, bf);
    const double d_cf = estimate_errors(kGauss, c, k, bf.trials, bf.seed, g_workers).d_total;
    v.detail << " a_bf=" << best.alpha_star << " D_cf/D_bf=" << d_cf / best.objective_value;
    v.require(d_cf <= 1.15 * best.objective_value, "D(a_cf) <= 1.15 D(a_bf)");
  }
}

// 6. alpha = 1 is optimal for averaging, and for max below the low-SNR threshold.
void unit_alpha(Verdict& v) {
  const std::size_t k = 12;
  const auto grid = default_alpha_grid();
  BruteForceOptions bf;
  bf.trials = 100000;
  bf.beta_trials = 100000;
  bf.seed = 6;
  bf.workers = g_workers;
  BetaStarCache cache;
  bf.cache = &cache;
  v.detail << "average argmin:";
  for (double db : {-10.0, 0.0, 10.0, 20.0, 30.0}) {
    const AlphaDecision d = brute_force_alpha(kGauss, PoolingMode::average(), k, db_to_linear(db), 1.0, grid, bf);
    v.detail << ' ' << d.alpha_star;
    v.require(d.alpha_star == 1.0, "average argmin = 1");
  }
  const double rho0 = low_snr_threshold(k, max_second_moment(kGauss, k, 1000000, 6, g_workers).value);
  v.detail << "; rho0=" << rho0 << " max argmin:";
  for (double f : {1.0, 0.5, 0.1}) {
    const AlphaDecision d = brute_force_alpha(kGauss, PoolingMode::max(), k, f * rho0, 1.0, grid, bf);
    v.detail << ' ' << d.alpha_star;
    v.require(d.alpha_star <= grid[1], "max argmin within one grid step of 1");
  }
}

// 7. Margin-based accuracy bound and the chi law of the error norm.
void margin_bound(Verdict& v) {
  DatasetOptions opt;
  opt.mode = PoolingMode::average();
  opt.rule = LabelRule::PlantedMargin;
  opt.planted_margin = 0.1;
  const SyntheticDataset ds = generate_dataset(2000, 7, opt);
  const LinearMarginModel lm = measure_linear_margin(ds, 7);
  const DataSplit split = split_dataset(ds.size(), 7);
  const double m2 = lm.margin * lm.margin;
  v.detail << "margin=" << lm.margin << " R0=" << lm.clean_accuracy;
  v.require(lm.margin > 0.0, "positive margin");
  SystemParams quiet;
  quiet.k_sensors = 4;
  quiet.n_features = 4;
  quiet.truncation_threshold = 0.0;
  for (double db : {10.0, 13.0, 16.0, 19.0, 22.0}) {
    const AirPoolConfig c = make_average_config(kGauss, 4, db_to_linear(db), 1.0);
    const AccuracyEstimate est = evaluate_accuracy(lm, ds, split.test, c, quiet, 200, 70, g_workers);
    const double bound = lm.clean_accuracy * (1.0 - est.d_sigma / m2);
    v.detail << " [" << db << "dB R_AP=" << est.r_ap << " bound=" << bound << "]";
    v.require(est.r_ap >= bound - 2 * est.r_ap_se, "R_AP >= R0(1 - D/margin^2) - 2SE");
  }
  const double nu1_sq = normalization_moments(kGauss, 1.0).nu_sq;
  const ChiCheck chi = chi_error_check(4, 4, 1.0, 10.0, nu1_sq, 100000, 71, g_workers);
  v.detail << " KS=" << chi.statistic << " crit=" << chi.critical_value;
  v.require(chi.passed, "chi goodness of fit at 1%");
}

// 8. Trained classifier under AirPooling over an SNR sweep.
void end_to_end(Verdict& v) {
  DatasetOptions opt;  // K = 4 views, N = 4 features, max pooling
  const SyntheticDataset ds = generate_dataset(5000, 8, opt);
  TrainOptions t;
  t.seed = 8;
  const ShallowClassifier clf = train_classifier(ds, t);
  const DataSplit split = split_dataset(ds.size(), t.seed);
  const double r0 = clean_accuracy(clf, ds, split.test);
  const std::vector<std::size_t> probe(split.train.begin(), split.train.begin() + 64);
  const double grad = gradient_check(clf, ds, probe);
  v.detail << "R0=" << r0 << " gradcheck=" << grad;
  v.require(r0 >= 0.85, "R0 >= 0.85");
  v.require(grad <= 1e-4, "gradient check <= 1e-4");
  SystemParams sys;
  sys.k_sensors = 4;
  sys.n_features = 4;
  SelectOptions so;
  so.seed = 8;
  so.workers = g_workers;
  std::vector<AccuracyEstimate> est;
  for (double db : {0.0, 5.0, 10.0, 15.0, 20.0}) {
    const double snr = db_to_linear(db);
    const AlphaDecision d = select_alpha(opt.mode, kGauss, 4, snr, 1.0, so);
    const AirPoolConfig c = make_max_config(kGauss, 4, d.alpha_star, d.beta, snr, 1.0);
    est.push_back(evaluate_accuracy(clf, ds, split.test, c, sys, 20, 80, g_workers));
    v.detail << " [" << db << "dB a=" << d.alpha_star << " R_AP=" << est.back().r_ap
             << " D=" << est.back().d_sigma << "]";
  }
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    const auto& lo = est[i];
    const auto& hi = est[i + 1];
    v.require(lo.r_ap <= hi.r_ap + 2 * std::hypot(lo.r_ap_se, hi.r_ap_se),
              "R_AP nonincreasing as SNR decreases");
    v.require(lo.d_sigma >= hi.d_sigma - 2 * std::hypot(lo.d_sigma_se, hi.d_sigma_se),
              "D nondecreasing as SNR decreases");
  }
}

// 9. Special-function identities.
void special_functions(Verdict& v) {
  double rec = 0.0;
  for (double x : log_grid(1e-3, 1e3, 2000)) {
    const double d = specfun::ln_gamma(x + 1) - specfun::ln_gamma(x) - std::log(x);
    rec = std::max(rec, std::abs(std::expm1(d)));
  }
  double trip = 0.0;
  for (double k : log_grid(0.1, 100.0, 30)) {
    for (double x0 : log_grid(0.05 * k, 4.0 * k + 10.0, 40)) {
      const double p = specfun::regularized_gamma_p(k, x0);
      if (p < 1e-6 || p > 1.0 - 1e-6) continue;
      const double x = specfun::inverse_regularized_gamma_p(k, p);
      trip = std::max(trip, std::abs(x - x0) / std::max(1.0, x0));
    }
  }
  double w0 = 0.0;
  const double branch = -1.0 / std::numbers::e;
  for (double off : log_grid(1e-6, 1e6 - branch, 2000)) {
    const double x = branch + off;
    const double w = specfun::lambert_w0(x);
    w0 = std::max(w0, std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x)));
  }
  v.detail << "lnGamma recursion=" << rec << " P round trip=" << trip << " W0 residual=" << w0;
  v.require(rec <= 1e-10, "lnGamma recursion 1e-10");
  v.require(trip <= 1e-8, "P round trip 1e-8");
  v.require(w0 <= 1e-12, "W0 residual 1e-12");
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc) {
      g_workers = static_cast<unsigned>(std::max(0, std::atoi(argv[++i])));
    } else {
      std::fprintf(stderr, "usage: %s [--strict] [--only N] [--workers W]\n", argv[0]);
      return 2;
    }
  }
  if (g_workers == 0) g_workers = default_workers();

  const std::vector<Criterion> criteria{
      {1, "latency", 1.0, latency},
      {2, "reconfigurability", 60.0, reconfigurability},
      {3, "bound-suite", 300.0, bound_suite},
      {4, "surrogate-asymptotics", 1.0, surrogate_asymptotics},
      {5, "closed-form-alpha", 600.0, closed_form},
      {6, "unit-alpha-optimality", 300.0, unit_alpha},
      {7, "margin-accuracy-bound", 300.0, margin_bound},
      {8, "synthetic-end-to-end", 600.0, end_to_end},
      {9, "special-functions", 5.0, special_functions},
  };
  int evaluated = 0, failed = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(secs < c.budget_s, "runtime budget");
    ++evaluated;
    failed += !v.pass;
    std::printf("%s criterion %d %s (%.2fs/%.0fs): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                secs, c.budget_s, v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d criteria evaluated, %d passed, %d failed\n", evaluated,
              evaluated - failed, failed);
  return strict && failed > 0 ? 1 : 0;
}
