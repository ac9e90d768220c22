#include "pme/hdmde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "pme/errors.hpp"
#include "pme/parallel.hpp"
#include "pme/rng.hpp"
#include "pme/stats.hpp"

namespace pme {

KmeansResult kmeans(const Matrix& X, int N, std::uint64_t seed, int max_iter) {
  const int I = static_cast<int>(X.rows());
  const int D = static_cast<int>(X.cols());
  if (N < 1 || N > I) throw ValidationError("kmeans: N must lie in [1, point count]");
  if (!X.allFinite()) throw ValidationError("kmeans: non-finite point");

  Rng rng(seed);
  Matrix centers(N, D);
  // kmeans++ seeding: next center drawn proportional to squared distance.
  Vector d2 = Vector::Constant(I, std::numeric_limits<double>::infinity());
  centers.row(0) = X.row(rng.below(I));
  for (int c = 1; c < N; ++c) {
    double total = 0.0;
    for (int i = 0; i < I; ++i) {
      double v = (X.row(i) - centers.row(c - 1)).squaredNorm();
      if (v < d2[i]) d2[i] = v;
      total += d2[i];
    }
    int pick = I - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < I; ++i) {
        acc += d2[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(I);  // all residual distances zero: any point works
    }
    centers.row(c) = X.row(pick);
  }

  std::vector<int> assign(I, -1);
  std::vector<int> counts(N, 0);
  for (int it = 0; it < max_iter; ++it) {
    std::atomic<bool> changed{false};
    std::fill(counts.begin(), counts.end(), 0);
    parallel_for(I, [&](std::int64_t i) {
      int best = 0;
      double best_d = (X.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < N; ++c) {
        double v = (X.row(i) - centers.row(c)).squaredNorm();
        if (v < best_d) {
          best_d = v;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed.store(true, std::memory_order_relaxed);
      }
    });
    for (int i = 0; i < I; ++i) ++counts[assign[i]];

    // Reseed empty clusters from the farthest point (ties: smaller index).
    for (int c = 0; c < N; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < I; ++i) {
        if (counts[assign[i]] <= 1) continue;  // keep donor clusters nonempty
        double v = (X.row(i) - centers.row(assign[i])).squaredNorm();
        if (v > far_d) {
          far_d = v;
          far = i;
        }
      }
      if (far < 0) throw NumericalError("kmeans: cannot fill empty cluster");
      --counts[assign[far]];
      assign[far] = c;
      counts[c] = 1;
      centers.row(c) = X.row(far);
      changed.store(true, std::memory_order_relaxed);
    }

    Matrix sums = Matrix::Zero(N, D);
    for (int i = 0; i < I; ++i) sums.row(assign[i]) += X.row(i);
    for (int c = 0; c < N; ++c) centers.row(c) = sums.row(c) / counts[c];
    if (!changed.load()) break;
  }
  return {std::move(centers), std::move(assign)};
}

double estimate_sigma(const Matrix& X, const KmeansResult& clusters) {
  const int I = static_cast<int>(X.rows());
  const int D = static_cast<int>(X.cols());
  const int N = static_cast<int>(clusters.centers.rows());
  if (static_cast<int>(clusters.assignment.size()) != I)
    throw ValidationError("estimate_sigma: assignment length mismatch");
  Vector within = Vector::Zero(N);
  Vector counts = Vector::Zero(N);
  for (int i = 0; i < I; ++i) {
    int c = clusters.assignment[i];
    within[c] += (X.row(i) - clusters.centers.row(c)).squaredNorm();
    counts[c] += 1.0;
  }
  double acc = 0.0;
  for (int c = 0; c < N; ++c) {
    if (counts[c] <= 0.0) throw ValidationError("estimate_sigma: empty cluster");
    acc += within[c] / counts[c];
  }
  return std::sqrt(acc / (D * N));
}

namespace {

/// Sum of responsibilities per component, computed with row-max shifted
/// exponentials. Fixed-width chunk partials keep the reduction deterministic
/// under any thread count.
Vector responsibility_sums(const Matrix& sq_dist, const Vector& log_theta,
                           double inv_two_sigma2) {
  const int I = static_cast<int>(sq_dist.rows());
  const int N = static_cast<int>(sq_dist.cols());
  const std::int64_t width = 1024;
  std::int64_t chunks = (I + width - 1) / width;
  Matrix partial = Matrix::Zero(chunks, N);
  parallel_for(chunks, [&](std::int64_t c) {
    std::int64_t lo = c * width, hi = std::min<std::int64_t>(I, lo + width);
    Vector logits(N), w(N);
    for (std::int64_t i = lo; i < hi; ++i) {
      for (int j = 0; j < N; ++j) logits[j] = log_theta[j] - sq_dist(i, j) * inv_two_sigma2;
      double m = logits.maxCoeff();
      double s = 0.0;
      for (int j = 0; j < N; ++j) {
        w[j] = std::exp(logits[j] - m);
        s += w[j];
      }
      partial.row(c) += (w / s).transpose();
    }
  });
  Vector sums = Vector::Zero(N);
  for (std::int64_t c = 0; c < chunks; ++c) sums += partial.row(c).transpose();
  return sums;
}

/// Solves for the constraint multipliers v = (v0, v1) such that
/// theta_j = c_j / (v0 + v1' mu_j) has unit mass and mixture mean x_bar.
/// Damped Gauss-Newton from the unconstrained point v = (I, 0).
Vector solve_multipliers(const Vector& c, const Matrix& mu, const Vector& x_bar,
                         double total_mass) {
  const int N = static_cast<int>(mu.rows());
  const int D = static_cast<int>(mu.cols());
  Vector v = Vector::Zero(1 + D);
  v[0] = total_mass;

  auto beta_of = [&](const Vector& vv, Vector& beta) {
    for (int j = 0; j < N; ++j) beta[j] = vv[0] + mu.row(j).dot(vv.tail(D));
  };
  auto residual_of = [&](const Vector& beta, Vector& r) {
    r.setZero();
    for (int j = 0; j < N; ++j) {
      double g = c[j] / beta[j];
      r[0] += g;
      r.tail(D) += g * mu.row(j).transpose();
    }
    r[0] -= 1.0;
    r.tail(D) -= x_bar;
  };

  Vector beta(N), r(1 + D), trial_beta(N), trial_r(1 + D);
  beta_of(v, beta);
  if ((beta.array() <= 0.0).any())
    throw NumericalError("em_theta: nonpositive multiplier denominator at start");
  residual_of(beta, r);
  double damping = 1e-8;
  const double tol = 1e-12 * (1.0 + x_bar.norm());
  for (int it = 0; it < 200 && r.norm() > tol; ++it) {
    // J = -sum_j (c_j / beta_j^2) P_j P_j' with P_j = (1, mu_j): symmetric.
    Matrix J = Matrix::Zero(1 + D, 1 + D);
    Vector P(1 + D);
    for (int j = 0; j < N; ++j) {
      P[0] = 1.0;
      P.tail(D) = mu.row(j).transpose();
      J -= (c[j] / (beta[j] * beta[j])) * P * P.transpose();
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Matrix H = J.transpose() * J;
      double floor = 1e-14 * (H.trace() + 1e-300);
      for (int a = 0; a <= D; ++a) H(a, a) += damping * std::max(H(a, a), floor) + floor;
      Vector step = H.ldlt().solve(-J.transpose() * r);
      Vector trial = v + step;
      beta_of(trial, trial_beta);
      if ((trial_beta.array() > 0.0).all()) {
        residual_of(trial_beta, trial_r);
        if (trial_r.norm() < r.norm()) {
          v = trial;
          beta = trial_beta;
          r = trial_r;
          accepted = true;
          break;
        }
      }
      damping *= 10.0;
      if (damping > 1e16) break;
    }
    if (!accepted) break;
    damping = std::max(damping / 4.0, 1e-12);
  }
  if (!(r.norm() <= 1e-8 * (1.0 + x_bar.norm())))
    throw NumericalError("em_theta: constraint multiplier solve did not converge");
  return v;
}

}  // namespace

Vector em_theta(const Matrix& X, const Matrix& centers, double sigma,
                const EmOptions& opts) {
  const int I = static_cast<int>(X.rows());
  const int N = static_cast<int>(centers.rows());
  if (I == 0 || N == 0) throw ValidationError("em_theta: empty input");
  if (X.cols() != centers.cols()) throw ValidationError("em_theta: dimension mismatch");
  if (!(sigma > 0.0)) throw ValidationError("em_theta: sigma must be positive");

  Matrix sq_dist(I, N);
  parallel_for(I, [&](std::int64_t i) {
    for (int j = 0; j < N; ++j)
      sq_dist(i, j) = (X.row(i) - centers.row(j)).squaredNorm();
  });
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const Vector x_bar = X.colwise().mean();
  const double diam = bbox_diameter(X);

  Vector theta = Vector::Constant(N, 1.0 / N);
  Vector log_theta(N), next(N);
  for (int k = 0; k < opts.max_iter; ++k) {
    for (int j = 0; j < N; ++j)
      log_theta[j] = theta[j] > 0.0 ? std::log(theta[j]) : -1e300;
    Vector c = responsibility_sums(sq_dist, log_theta, inv_two_sigma2);
    Vector v = solve_multipliers(c, centers, x_bar, static_cast<double>(I));
    for (int j = 0; j < N; ++j)
      next[j] = c[j] / (v[0] + centers.row(j).dot(v.tail(X.cols())));
    double change = (next - theta).lpNorm<Eigen::Infinity>();
    bool stop = change < opts.eps;
    // Stop returns the pre-update iterate, except on the very first step:
    // the uniform start has not passed through the constraint solve.
    Vector result = stop ? (k == 0 ? next : theta) : Vector();
    theta = next;
    if (stop) {
      result /= result.sum();
      double mean_err = ((result.transpose() * centers).transpose() - x_bar).norm();
      if (!(mean_err <= opts.mean_tol_factor * std::max(diam, 1e-300)))
        throw NumericalError("em_theta: mixture mean constraint violated at convergence");
      return result;
    }
  }
  throw ConvergenceError("em_theta: weight iteration exceeded max_iter");
}

Vector mixture_density(const MixtureModel& model, const Matrix& X) {
  const int I = static_cast<int>(X.rows());
  const int N = static_cast<int>(model.centers.rows());
  const int D = static_cast<int>(X.cols());
  if (model.centers.cols() != D) throw ValidationError("mixture_density: dimension mismatch");
  if (!(model.sigma > 0.0)) throw ValidationError("mixture_density: sigma must be positive");
  const double log_norm = -0.5 * D * std::log(2.0 * M_PI * model.sigma * model.sigma);
  const double inv_two_sigma2 = 1.0 / (2.0 * model.sigma * model.sigma);
  Vector log_theta(N);
  for (int j = 0; j < N; ++j)
    log_theta[j] = model.theta[j] > 0.0 ? std::log(model.theta[j]) : -1e300;
  Vector out(I);
  parallel_for(I, [&](std::int64_t i) {
    double m = -std::numeric_limits<double>::infinity();
    Vector logits(N);
    for (int j = 0; j < N; ++j) {
      logits[j] = log_theta[j] + log_norm -
                  (X.row(i) - model.centers.row(j)).squaredNorm() * inv_two_sigma2;
      m = std::max(m, logits[j]);
    }
    double s = 0.0;
    for (int j = 0; j < N; ++j) s += std::exp(logits[j] - m);
    out[i] = std::exp(m) * s;
  });
  return out;
}

ZReport z_statistic(const MixtureModel& model_n, const MixtureModel& model_n1,
                    const Matrix& X) {
  const int I = static_cast<int>(X.rows());
  if (I < 2) throw ValidationError("z_statistic: need at least two points");
  Vector p_n = mixture_density(model_n, X);
  Vector p_n1 = mixture_density(model_n1, X);
  Vector delta = p_n1 - p_n;
  double mean = delta.mean();
  // Two-pass variance: same quantity as mean(delta^2) - mean^2, stably.
  double var = (delta.array() - mean).square().mean();
  double sd = std::sqrt(var);
  if (!(sd > 0.0))
    throw NumericalError(
        "z_statistic: degenerate increment variance (identical density fits)");
  ZReport zr;
  zr.model_size = static_cast<int>(model_n.centers.rows());
  zr.delta_mean = mean;
  zr.delta_sd = sd;
  zr.z = std::sqrt(static_cast<double>(I)) * mean / sd;
  return zr;
}

HdmdeResult hdmde(const Matrix& X, const HdmdeOptions& opts) {
  const int I = static_cast<int>(X.rows());
  const int D = static_cast<int>(X.cols());
  if (I < 2) throw ValidationError("hdmde: need at least two points");
  int n0 = opts.n0 > 0 ? opts.n0 : 20 * D;
  int n_max = opts.n_max > 0 ? opts.n_max : I / 2;
  if (n0 > n_max)
    throw ValidationError("hdmde: starting model size exceeds the cap (n0 > n_max)");
  double z_crit = normal_quantile(1.0 - opts.alpha / 2.0);

  auto fit = [&](int N) {
    KmeansResult km = kmeans(X, N, mix64(opts.seed) ^ mix64(static_cast<std::uint64_t>(N)));
    double sigma = estimate_sigma(X, km);
    if (!(sigma > 0.0))
      throw NumericalError("hdmde: degenerate bandwidth (all points sit on their centers)");
    Vector theta = em_theta(X, km.centers, sigma, opts.em);
    return MixtureModel{std::move(km.centers), std::move(theta), sigma};
  };

  HdmdeResult out;
  MixtureModel current = fit(n0);
  for (int N = n0;; ++N) {
    if (N + 1 > n_max)
      throw ConvergenceError(
          "hdmde: model size cap reached without accepting a size (" +
          std::to_string(N + 1) + " > " + std::to_string(n_max) + ")");
    MixtureModel next = fit(N + 1);
    ZReport zr = z_statistic(current, next, X);
    out.trace.push_back(zr);
    if (std::abs(zr.z) < z_crit) {
      out.waj.nodes = std::move(current.centers);
      out.waj.weights = std::move(current.theta);
      out.waj.sigma = current.sigma;
      out.waj.alpha = opts.alpha;
      out.waj.n0 = n0;
      return out;
    }
    current = std::move(next);
  }
}

}  // namespace pme
