#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "iml/common.hpp"
#include "iml/path.hpp"
#include "iml/spectral.hpp"

namespace iml {

/// I(mu) = E(psi, psi) with psi = sqrt(d mu / dm); finite on finite spaces.
double rate_I(const SymmetricMarkovModel& model, const Eigen::VectorXd& mu);

/// J = I - lambda_1 >= 0.
double rate_J(const SpectralDecomposition& spec, const Eigen::VectorXd& mu);

/// sum_i J^{(i)}(mu_i) under the product-density constraint
/// prod_i d mu_i/dm = d mu/dm (within 1e-9 per state), else +infinity.
ExtendedReal rate_bold_J(const std::vector<const SpectralDecomposition*>& specs,
                         const Eigen::VectorXd& mu,
                         const std::vector<Eigen::VectorXd>& mus);

/// J_eps(nu) = E(psi,psi) - lambda_1 for the unique preimage psi^2 =
/// T_eps^{-1}[d nu/dm] when it is nonnegative with unit mass, else +infinity.
ExtendedReal rate_J_eps(const SpectralDecomposition& spec, const Eigen::VectorXd& nu,
                        double eps);

struct SolverTrace {
    int starts = 0;
    std::vector<int> iterations;
    std::vector<double> best_per_start;
};

struct VariationalResult {
    double value = 0.0;
    Eigen::VectorXd argmax; // unit vector in L^2(m), entrywise >= 0
    SolverTrace trace;
    std::optional<double> certificate_gap; // distance to the grid oracle
};

/// N(theta, eps, h) = sup over the L^2(m) unit sphere of
/// theta (int T_eps[psi^2]^p dm_h)^{1/p} - p E(psi,psi) + p lambda_1
/// (eps = 0 uses psi^{2p}); projected gradient ascent with deterministic
/// multi-starts. Throws NonConvergence when the best start misses the
/// gradient tolerance.
VariationalResult variational_N(const SpectralDecomposition& spec, double theta, double eps,
                                const Eigen::VectorXd& h, int p, bool certify = false);

/// Dense sphere-grid oracle for N <= 3 states, with local grid refinement.
double variational_N_grid(const SpectralDecomposition& spec, double theta, double eps,
                          const Eigen::VectorXd& h, int p);

/// (1/p) sum_i N^{(i)}(theta, 0, h).
double mgf_rhs(const std::vector<const SpectralDecomposition*>& specs, double theta,
               const Eigen::VectorXd& h, int p);

/// Largest eigenvalue of L + diag(V) in the m-symmetric sense.
double tilted_principal_eigenvalue(const SymmetricMarkovModel& model,
                                   const Eigen::VectorXd& v);

struct VaradhanCheck {
    double lhs = 0.0; // tilted principal eigenvalue + lambda_1
    double rhs = 0.0; // variational sup from the gradient solver
    double gap = 0.0;
};

/// Feynman-Kac/Varadhan identity for the smoothed occupation functional.
VaradhanCheck occupation_varadhan_check(const SpectralDecomposition& spec,
                                        const Eigen::VectorXd& f, double theta, double eps);

struct MgfPoint {
    double t = 0.0;
    double estimate = 0.0;  // (1/t) log MC mean of exp(theta <.,h>^{1/p})
    double std_error = 0.0;
    bool heavy_tail = false; // top 1% of the weight carries > 50% of the mean
};

struct MgfSlope {
    std::vector<MgfPoint> points;
    double slope = 0.0;          // Richardson extrapolation in 1/t
    double rhs_exact = 0.0;      // mgf_rhs at eps = 0
    double rhs_smoothed = 0.0;   // (1/p) sum_i N^{(i)}(theta, eps, h), eps > 0 only
    bool heavy_tail = false;
};

/// Monte Carlo slope of the intersection-functional log-MGF. eps > 0 uses
/// the smoothed intersection functional, eps = 0 the exact one.
MgfSlope mc_log_mgf_slope(const std::vector<const SpectralDecomposition*>& specs,
                          const std::vector<int>& x0s, double theta,
                          const Eigen::VectorXd& h, int p, double eps,
                          const std::vector<double>& t_grid, std::int64_t n_tuples,
                          std::uint64_t seed, int threads = 0);

} // namespace iml
