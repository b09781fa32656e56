#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "supermask/data.hpp"
#include "supermask/network.hpp"

// Independent oracles. None of them runs a backward pass: gradients come from
// central differences, distributions from Monte-Carlo counts, and subnetwork
// forwards from physically compacted weights.
namespace supermask::verification {

/// (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every coordinate, in double.
DenseArray<double> finite_diff_grad(const std::function<double(const DenseArray<double>&)>& f,
                                    const DenseArray<double>& x, double eps = 1e-3);

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(const DenseArray<double>& a, const DenseArray<double>& b);

/// Compares tape gradients of `loss()` w.r.t. `params` against central
/// differences obtained by perturbing the leaves in place. Returns the worst
/// relative error over the parameters.
double tape_vs_finite_difference(const std::function<Var<double>()>& loss, std::vector<Var<double>> params,
                                 double eps = 1e-3);

/// Fraction of n independent STGS draws that keep a connection with logit m_hat.
double monte_carlo_keep_rate(double m_hat, Index n, Rng& rng);

/// Thresholded forward computed without masks: kept weights are gathered into
/// sparse triplets, rebuilt densely with the rescale factor folded in, and
/// pushed through a plain loop-based pass (no tape).
DenseArray<Real> brute_force_subnetwork_forward(const Network<Real>& net, const DenseArray<Real>& x);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

CheckResult check_gumbel_marginal(std::uint64_t seed = 1);
CheckResult check_shift_invariance(std::uint64_t seed = 2);
CheckResult check_parametrization_equivalence(std::uint64_t seed = 3);
CheckResult check_gradients(int seeds = 20);
CheckResult check_forward_degeneracy(std::uint64_t seed = 5);
CheckResult check_dwr_unbiased(std::uint64_t seed = 6);
CheckResult check_eval_saturation(std::uint64_t seed = 9);

/// All of the above, in order.
std::vector<CheckResult> run_oracle_suite();

void print_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace supermask::verification
