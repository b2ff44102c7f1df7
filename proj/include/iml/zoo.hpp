#pragma once

#include <cstdint>
#include <vector>

#include "iml/common.hpp"
#include "iml/spectral.hpp"

namespace iml {

enum class Boundary { Reflecting, Absorbing };

/// Level-n Sierpinski gasket graph: uniform vertex measure with total mass 1,
/// edge rates 5^level (walk-exponent time scaling), metric the Euclidean
/// embedding distance with unit outer side.
SymmetricMarkovModel build_gasket_graph(int level);

/// Nearest-neighbor lattice in [0,1]^k, k <= 3. Reflecting keeps all mass;
/// absorbing kills at the rate of the missing neighbors. Per-dimension rates
/// are mesh^{-2}; m is uniform with total mass 1.
SymmetricMarkovModel build_grid(const std::vector<int>& dims, Boundary boundary);

/// Cycle of n sites with jump rate d(x,y)^{-(1+alpha)} m(y) for the arc
/// metric; conservative, uniform m with total mass 1.
SymmetricMarkovModel build_long_range_torus(int n, double alpha);

struct SlopeFit {
    double exponent_hat = 0.0; // rho_hat or mu_hat
    double residual = 0.0;     // max |log deviation| over the window
    double t_min = 0.0;
    double t_max = 0.0;
    bool flat_window = false;  // slope indistinguishable from 0
};

/// OLS fit of log sum_x p_t(x,x) m(x) against log t; exponent_hat = -2*slope.
SlopeFit fit_trace_exponent(const SpectralDecomposition& spec, double t_min, double t_max,
                            int samples = 12);

/// OLS fit of log max_{x,y} p_t(x,y) against log t; exponent_hat = -2*slope.
SlopeFit fit_ultracontractivity(const SpectralDecomposition& spec, double t_min, double t_max,
                                int samples = 12);

struct GreenReport {
    int p = 2;
    double green_sup = 0.0;                               // sup_x sum_y R_1(x,y)^p m(y)
    std::vector<std::pair<double, double>> delta_curve;   // (delta, sup for R_{1,delta})
};

GreenReport check_green_conditions(const SpectralDecomposition& spec, int p,
                                   const std::vector<double>& deltas = {});

struct TightnessPoint {
    double kept_mass_fraction = 0.0; // m(K)/m(E)
    double sup_outside = 0.0;        // sup_x R_1 1_{K^c}(x)
};

std::vector<TightnessPoint> check_tightness(const SpectralDecomposition& spec,
                                            const std::vector<std::vector<int>>& exhaustion);

/// Largest p with d_f - p(d_f - d_w) > 0: d_f/(d_f-d_w) when d_f > d_w,
/// +infinity otherwise.
ExtendedReal admissible_p(double d_f, double d_w);

/// Smallest C_delta with ||f||_{2p}^2 <= C_delta ||f||_2^2 + delta E(f,f)
/// over seeded random f.
double fit_sobolev_constant(const SpectralDecomposition& spec, int p, double delta,
                            int trials, std::uint64_t seed);

/// Smallest C making ||psi_n||_inf <= C lambda_n^{rho/2} and
/// C^{-1} n^{1/rho} <= lambda_n <= C n^{1/rho} hold for all n >= n_min
/// (1-based eigenvalue index).
double eigen_growth_constant(const SpectralDecomposition& spec, double rho, int n_min = 2);

struct HeatBoundCheck {
    bool holds = false;
    double prefactor = 0.0; // c2 (amplitude)
    double gauss_rate = 0.0; // c3, Gaussian form only
};

/// Entrywise (sub-)Gaussian upper bound p_t(x,y) <= c2 t^{-d_f/d_w}
/// exp{-c3 (d^{d_w}/t)^{1/(d_w-1)}} with constants fitted on a coarse
/// subgrid and verified on a dense scan of the window.
HeatBoundCheck check_gaussian_bound(const SpectralDecomposition& spec, double d_f, double d_w,
                                    double t_min, double t_max, int scan_samples = 50);

/// Entrywise jump bound p_t(x,y) <= c * min(t^{-d_f/d_w}, t/d^{d_f+d_w}).
HeatBoundCheck check_jump_bound(const SpectralDecomposition& spec, double d_f, double d_w,
                                double t_min, double t_max, int scan_samples = 50);

/// Lipschitz-type modulus of p_t with respect to the model metric
/// (stand-in report for uniform continuity on a finite space).
double heat_kernel_modulus(const SpectralDecomposition& spec, double t);

/// Default exponent-fit window: t_min = mesh^{d_w} (mesh = smallest positive
/// metric distance), t_max tied to the spectral gap.
std::pair<double, double> suggested_fit_window(const SpectralDecomposition& spec,
                                               double d_w_nominal);

/// Nominal walk exponent per zoo family, parsed from the model label
/// ("gasket-*" -> log5/log2, "torus-*-alpha*" -> alpha, else 2).
double nominal_walk_exponent(const SymmetricMarkovModel& model);

struct AssumptionReport {
    int p_exponent = 2;
    double green_sup = 0.0;
    std::vector<std::pair<double, double>> green_delta_curve;
    SlopeFit trace_fit;
    SlopeFit ultracontractivity_fit;
    std::vector<TightnessPoint> tightness_profile;
    double sobolev_c_1 = 0.0;   // C_delta at delta = 1
    double sobolev_c_01 = 0.0;  // C_delta at delta = 0.1
    double eigen_growth_c = 0.0;
    double a2_modulus = 0.0;
};

/// Full assumption battery with the suggested window and default exhaustion.
AssumptionReport check_assumptions(const SpectralDecomposition& spec, int p,
                                   std::uint64_t seed = 1);

} // namespace iml
