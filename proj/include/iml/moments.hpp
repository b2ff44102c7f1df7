#pragma once

#include <vector>

#include "iml/spectral.hpp"
#include "iml/tensor.hpp"

namespace iml {

/// Simplex exponential integral over {r_j >= 0, sum_{j<=k} r_j <= t} of
/// prod_{j<=k} exp(-lambda_j r_j) * exp(-lambda_{k+1} (t - sum r_j));
/// the convolution of exponentials, computed by divided differences of
/// lambda -> exp(-lambda t) with a Taylor fallback below gap 1e-6.
double simplex_exp_integral(const std::vector<double>& lambdas, double t);

/// Path-ordered chain tensor: H_t(x_1..x_k) integrates the product of k+1
/// heat kernels from x0 through x_1..x_k with the terminal point summed
/// against m, over the time simplex. Entrywise nonnegative.
DenseTensor h_t_tensor(const SpectralDecomposition& spec, int x0, double t, int k);

/// E[<f, l^IS>^m <f, l_eps^IS>^{k-m}; joint survival] by spectral summation
/// and permutated tensor products.
double mixed_moment_formula(const std::vector<const SpectralDecomposition*>& specs,
                            const std::vector<int>& x0s, const Eigen::VectorXd& f, double t,
                            int k, int m_exact, double eps);

/// E[(<f, l^IS> - <f, l_eps^IS>)^k; joint survival] via the alternating
/// binomial sum over mixed moments.
double alternating_moment_formula(const std::vector<const SpectralDecomposition*>& specs,
                                  const std::vector<int>& x0s, const Eigen::VectorXd& f,
                                  double t, int k, double eps);

/// ||H_t||_{L^p(E^k)} with the m^{(x)k} weight (used against the
/// e^t [sup_y sum_x R_1(x,y)^p m(x)]^{k/p} bound).
double h_t_lp_norm(const DenseTensor& h, const Eigen::VectorXd& m, double p);

} // namespace iml
