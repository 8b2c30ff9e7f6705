#pragma once

// Naive reference implementations shared by the unit and acceptance tests.
// Everything here is written with plain loops over scalars and never calls
// the library routine it checks.

#include "lookout/planner.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Open-loop metrics

inline double l2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const long n = a.rows();
  const long t = a.cols() / 2;
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    for (long s = 0; s < t; ++s) {
      const double dx = a(i, 2 * s) - b(i, 2 * s);
      const double dy = a(i, 2 * s + 1) - b(i, 2 * s + 1);
      sum += std::sqrt(dx * dx + dy * dy);
    }
  }
  return sum / static_cast<double>(n * t);
}

inline double min_sade(const std::vector<Eigen::MatrixXd>& ys, const Eigen::MatrixXd& gt) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : ys) best = std::min(best, l2(gt, y));
  return best;
}

inline double mean_sade(const std::vector<Eigen::MatrixXd>& ys, const Eigen::MatrixXd& gt) {
  double sum = 0.0;
  for (const auto& y : ys) sum += l2(gt, y);
  return sum / static_cast<double>(ys.size());
}

// (1/S) sum_i sum_{j != i}
inline double mean_self_distance(const std::vector<Eigen::MatrixXd>& ys) {
  const std::size_t s = ys.size();
  if (s < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (j != i) sum += l2(ys[i], ys[j]);
    }
  }
  return sum / static_cast<double>(s);
}

// sum_i min_{j != i}
inline double min_self_distance(const std::vector<Eigen::MatrixXd>& ys) {
  const std::size_t s = ys.size();
  if (s < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s; ++j) {
      if (j != i) best = std::min(best, l2(ys[i], ys[j]));
    }
    sum += best;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Planners

struct ContingencyAnswer {
  int action = -1;
  std::vector<int> contingent;
  double objective = std::numeric_limits<double>::infinity();
};

struct ExpectedAnswer {
  int action = -1;
  int contingent = -1;
  double objective = std::numeric_limits<double>::infinity();
};

// Enumerates every (action, contingent-per-future) assignment. The odometer
// walks assignments in lexicographic order and only a strictly better
// objective replaces the incumbent, so ties resolve to the lowest indices.
inline ContingencyAnswer enumerate_contingency(const lookout::CostTable& t, const std::vector<double>& p) {
  ContingencyAnswer best;
  const std::size_t K = p.size();
  for (std::size_t a = 0; a < t.action.size(); ++a) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) worst = std::max(worst, t.action[a][k]);
    const std::size_t nc = t.contingent[a].size();
    std::vector<int> pick(K, 0);
    while (true) {
      double to_go = 0.0;
      for (std::size_t k = 0; k < K; ++k) to_go += p[k] * t.contingent[a][static_cast<std::size_t>(pick[k])][k];
      const double obj = worst + to_go;
      if (obj < best.objective) best = {static_cast<int>(a), pick, obj};
      int pos = static_cast<int>(K) - 1;
      while (pos >= 0 && static_cast<std::size_t>(++pick[static_cast<std::size_t>(pos)]) == nc) {
        pick[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  return best;
}

// Same answer as enumerate_contingency without the product space: the
// objective separates over futures, so each future's branch is enumerated on
// its own. Used for the instances whose product space is too large.
inline ContingencyAnswer enumerate_contingency_separable(const lookout::CostTable& t, const std::vector<double>& p) {
  ContingencyAnswer best;
  const std::size_t K = p.size();
  for (std::size_t a = 0; a < t.action.size(); ++a) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) worst = std::max(worst, t.action[a][k]);
    std::vector<int> pick(K, 0);
    double to_go = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double low = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < t.contingent[a].size(); ++j) {
        if (t.contingent[a][j][k] < low) {
          low = t.contingent[a][j][k];
          pick[k] = static_cast<int>(j);
        }
      }
      to_go += p[k] * low;
    }
    if (worst + to_go < best.objective) best = {static_cast<int>(a), pick, worst + to_go};
  }
  return best;
}

inline ExpectedAnswer enumerate_expected(const lookout::CostTable& t, const std::vector<double>& p) {
  ExpectedAnswer best;
  for (std::size_t a = 0; a < t.action.size(); ++a) {
    for (std::size_t j = 0; j < t.contingent[a].size(); ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) v += p[k] * (t.action[a][k] + t.contingent[a][j][k]);
      if (v < best.objective) best = {static_cast<int>(a), static_cast<int>(j), v};
    }
  }
  return best;
}

inline double product_size(const lookout::CostTable& t, std::size_t k) {
  double total = 0.0;
  for (const auto& rows : t.contingent) total += std::pow(static_cast<double>(rows.size()), static_cast<double>(k));
  return total;
}

// Random table: up to 50 actions, 50 contingents per action, 5 futures.
// Integer instances use small integer costs and dyadic probabilities so that
// exact ties occur and sums are exact.
struct Instance {
  lookout::CostTable table;
  std::vector<double> probabilities;
};

inline Instance random_instance(std::mt19937_64& rng, bool integer_costs, int max_actions = 50,
                                int max_contingents = 50, int max_futures = 5) {
  std::uniform_int_distribution<int> na_d(1, max_actions), nc_d(1, max_contingents), k_d(1, max_futures);
  std::uniform_real_distribution<double> real(0.0, 100.0);
  std::uniform_int_distribution<int> small(0, 4);
  Instance inst;
  const int na = na_d(rng);
  const int K = k_d(rng);
  auto draw = [&] { return integer_costs ? static_cast<double>(small(rng)) : real(rng); };
  inst.table.action.resize(static_cast<std::size_t>(na));
  inst.table.contingent.resize(static_cast<std::size_t>(na));
  for (int a = 0; a < na; ++a) {
    for (int k = 0; k < K; ++k) inst.table.action[static_cast<std::size_t>(a)].push_back(draw());
    const int nc = nc_d(rng);
    auto& rows = inst.table.contingent[static_cast<std::size_t>(a)];
    rows.resize(static_cast<std::size_t>(nc));
    for (auto& row : rows) {
      for (int k = 0; k < K; ++k) row.push_back(draw());
    }
  }
  if (integer_costs) {
    // Compositions of 16 into K positive parts.
    std::vector<int> w(static_cast<std::size_t>(K), 1);
    std::uniform_int_distribution<int> pick(0, K - 1);
    for (int r = K; r < 16; ++r) ++w[static_cast<std::size_t>(pick(rng))];
    for (int v : w) inst.probabilities.push_back(v / 16.0);
  } else {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      inst.probabilities.push_back(u(rng));
      sum += inst.probabilities.back();
    }
    for (double& v : inst.probabilities) v /= sum;
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Gaussians

// Closed form of KL(N(mu, s^2) || N(0, 1)) for one coordinate, written out.
inline double kl_1d(double mu, double log_sigma) {
  const double s2 = std::exp(2.0 * log_sigma);
  return 0.5 * (s2 + mu * mu - 1.0) - log_sigma;
}

}  // namespace oracle
