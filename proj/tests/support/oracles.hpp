#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the library's solvers, metrics or percentile code.

#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<double> y;  // +1 / -1
};

/// Plain-loop objectives, written separately from the library's Eigen versions.
double logistic_objective(const Dataset& data, const std::vector<double>& w, double b, double C);
double hinge_objective(const Dataset& data, const std::vector<double>& w, double b, double C);

struct GridResult {
  std::vector<double> w;
  double b = 0.0;
  double value = 0.0;
};

/// Dense grid over [-box, box]^(d+1) with `points` per axis, then `refinements`
/// re-grids centred on the incumbent, each spanning +-`shrink` grid steps.
GridResult grid_minimize(const std::function<double(const std::vector<double>&, double)>& f,
                         std::size_t d, double box, std::size_t points = 41,
                         std::size_t refinements = 2, double shrink = 2.0);

/// Central differences of f at p with step h.
std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& p, double h);

/// Smallest order statistic whose rank is at least p% of n (1-based rank ceil(p n / 100)).
std::size_t nearest_rank(std::vector<std::size_t> values, double p);

}  // namespace oracle
