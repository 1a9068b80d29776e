/*
 * Copyright 2026 The detxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>

#include "detxplain/error.hpp"
#include "detxplain/perturbation.hpp"

namespace detxplain {

namespace {

constexpr int kMaxSweeps = 100000;
constexpr double kTolerance = 1e-13;
constexpr int kBisectionSteps = 60;

struct Centering {
  std::vector<double> x_mean;
  double y_mean = 0.0;
};

Centering Center(const LassoProblem& problem) {
  const int n = problem.x.rows;
  const int p = problem.x.cols;
  Centering c;
  c.x_mean.assign(p, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = problem.sample_weights[i];
    total += s;
    c.y_mean += s * problem.y[i];
    for (int j = 0; j < p; ++j) c.x_mean[j] += s * problem.x(i, j);
  }
  c.y_mean /= total;
  for (double& m : c.x_mean) m /= total;
  return c;
}

void Validate(const LassoProblem& problem) {
  const auto n = static_cast<std::size_t>(problem.x.rows);
  if (n == 0 || problem.x.cols == 0 || problem.y.size() != n ||
      problem.sample_weights.size() != n) {
    Fail(ErrorCode::kInvalidArgument, "LASSO problem dimensions do not agree");
  }
  double total = 0.0;
  for (double s : problem.sample_weights) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      Fail(ErrorCode::kInvalidArgument, "sample weights must be non-negative");
    }
    total += s;
  }
  if (total <= 0.0) {
    Fail(ErrorCode::kInvalidArgument, "sample weights sum to zero");
  }
}

// Gram-form coordinate descent on the centred, scaled problem.
struct GramSolver {
  Matrix gram;
  std::vector<double> corr;

  explicit GramSolver(const LassoProblem& problem) {
    Matrix xs;
    std::vector<double> ys;
    LassoDesign(problem, &xs, &ys);
    const int n = xs.rows;
    const int p = xs.cols;
    gram = Matrix(p, p);
    corr.assign(p, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        const double a = xs(i, j);
        if (a == 0.0) continue;
        corr[j] += a * ys[i];
        for (int k = j; k < p; ++k) gram(j, k) += a * xs(i, k);
      }
    }
    for (int j = 0; j < p; ++j) {
      for (int k = 0; k < j; ++k) gram(j, k) = gram(k, j);
    }
  }

  std::vector<double> Solve(double lambda) const {
    const int p = gram.rows;
    std::vector<double> w(p, 0.0);
    std::vector<double> gw(p, 0.0);  // gram * w
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      double max_change = 0.0;
      double scale = 0.0;
      for (int j = 0; j < p; ++j) {
        const double gjj = gram(j, j);
        if (gjj <= 0.0) continue;
        const double rho = corr[j] - gw[j] + gjj * w[j];
        double next = 0.0;
        if (rho > lambda) {
          next = (rho - lambda) / gjj;
        } else if (rho < -lambda) {
          next = (rho + lambda) / gjj;
        }
        const double delta = next - w[j];
        if (delta != 0.0) {
          for (int k = 0; k < p; ++k) gw[k] += gram(k, j) * delta;
          w[j] = next;
        }
        max_change = std::max(max_change, std::abs(delta));
        scale = std::max(scale, std::abs(next));
      }
      if (max_change <= kTolerance * std::max(1.0, scale)) break;
    }
    return w;
  }

  double LambdaMax() const {
    double m = 0.0;
    for (double c : corr) m = std::max(m, std::abs(c));
    return m;
  }
};

SurrogateModel Assemble(const LassoProblem& problem, std::vector<double> w,
                        double lambda) {
  const Centering c = Center(problem);
  SurrogateModel model;
  model.lambda = lambda;
  model.intercept = c.y_mean;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] != 0.0) {
      model.selected.insert(static_cast<int>(j));
      model.intercept -= c.x_mean[j] * w[j];
    }
  }
  model.weights = std::move(w);
  return model;
}

int NonZero(const std::vector<double>& w) {
  return static_cast<int>(
      std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
}

}  // namespace

void LassoDesign(const LassoProblem& problem, Matrix* xs,
                 std::vector<double>* ys) {
  Validate(problem);
  const Centering c = Center(problem);
  const int n = problem.x.rows;
  const int p = problem.x.cols;
  *xs = Matrix(n, p);
  ys->assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double r = std::sqrt(problem.sample_weights[i]);
    (*ys)[i] = r * (problem.y[i] - c.y_mean);
    for (int j = 0; j < p; ++j) (*xs)(i, j) = r * (problem.x(i, j) - c.x_mean[j]);
  }
}

SurrogateModel FitLasso(const LassoProblem& problem, double lambda) {
  if (!(lambda >= 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  }
  const GramSolver solver(problem);
  return Assemble(problem, solver.Solve(lambda), lambda);
}

SurrogateModel FitLassoMaxFeatures(const LassoProblem& problem,
                                   int max_features) {
  if (max_features < 1) {
    Fail(ErrorCode::kInvalidArgument, "max_features must be at least 1");
  }
  const GramSolver solver(problem);
  double hi = solver.LambdaMax();
  std::vector<double> best = solver.Solve(hi);
  double lo = 0.0;
  std::vector<double> at_lo = solver.Solve(lo);
  if (NonZero(at_lo) <= max_features) {
    return Assemble(problem, std::move(at_lo), lo);
  }
  for (int step = 0; step < kBisectionSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    std::vector<double> w = solver.Solve(mid);
    if (NonZero(w) <= max_features) {
      hi = mid;
      best = std::move(w);
    } else {
      lo = mid;
    }
  }
  return Assemble(problem, std::move(best), hi);
}

}  // namespace detxplain
