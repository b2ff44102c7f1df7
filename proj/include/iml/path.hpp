#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "iml/rng.hpp"
#include "iml/spectral.hpp"

namespace iml {

/// One continuous-time trajectory. On survival the sojourns sum to the
/// horizon exactly (last sojourn truncated); on killing they sum to the
/// death time.
struct PathSample {
    std::vector<int> states;
    std::vector<double> sojourns;
    double horizon = 0.0;
    bool survived = false;
    std::uint64_t rng_stream_id = 0;
};

enum class MeasureKind { Occupation, SmoothedOccupationDensity, Intersection, Generic };

struct DiscreteMeasure {
    Eigen::VectorXd masses;
    MeasureKind kind = MeasureKind::Generic;

    double total() const { return masses.sum(); }
};

/// Gillespie simulation with killing folded into the exit rate.
PathSample sample_path(const SymmetricMarkovModel& model, int x0, double t, RngStream& rng);

/// Per-state sojourn mass; throws PathKilled unless the path survived.
DiscreteMeasure occupation_measure(const PathSample& path, int n_states);

/// density(x) = sum_j sojourn_j p_eps(state_j, x) (exact time integral).
Eigen::VectorXd smoothed_occupation_density(const PathSample& path,
                                            const SpectralDecomposition& spec, double eps);

/// mass(x) = m(x) prod_i density_i(x); the [0,t]^p time integral factorizes
/// over the independent coordinates.
DiscreteMeasure intersection_measure_smoothed(const std::vector<PathSample>& paths,
                                              const std::vector<const SpectralDecomposition*>& specs,
                                              double eps);

/// mass(x) = m(x)^{1-p} prod_i l_i({x}).
DiscreteMeasure intersection_measure_exact(const std::vector<PathSample>& paths,
                                           const Eigen::VectorXd& m);

struct TupleStats {
    std::int64_t attempts = 0;
    std::int64_t accepted = 0;
    double acceptance_rate = 0.0;
};

/// Rejection sampling of jointly surviving tuples. Tuple index i is assigned
/// in attempt order; the sink may run on worker threads but each index is
/// visited exactly once, so slot-writes give deterministic reductions.
/// Attempt a of process i draws from stream a*p + i of the master seed.
TupleStats for_each_surviving_tuple(
    const std::vector<const SymmetricMarkovModel*>& models, const std::vector<int>& x0s,
    double t, std::int64_t n_tuples, std::uint64_t seed,
    const std::function<void(std::int64_t, const std::vector<PathSample>&)>& sink,
    int threads = 0);

struct TupleEnsemble {
    std::vector<std::vector<PathSample>> tuples;
    TupleStats stats;
};

TupleEnsemble sample_surviving_tuples(const std::vector<const SymmetricMarkovModel*>& models,
                                      const std::vector<int>& x0s, double t,
                                      std::int64_t n_tuples, std::uint64_t seed,
                                      int threads = 0);

struct ConvergenceRow {
    double eps = 0.0;
    double estimate = 0.0; // mean of |<f, l_eps^IS> - <f, l^IS>|^k over tuples
    double std_error = 0.0;
};

/// Monte Carlo table for the L^k convergence diagnostic over an eps grid.
std::vector<ConvergenceRow> epsilon_convergence_diagnostic(
    const std::vector<const SpectralDecomposition*>& specs, const std::vector<int>& x0s,
    const Eigen::VectorXd& f, double t, int k, const std::vector<double>& eps_grid,
    std::int64_t n_tuples, std::uint64_t seed, int threads = 0);

struct ExpApproxRow {
    double t = 0.0;
    int k = 0;
    double eps = 0.0;
    double c_hat = 0.0;
};

/// C_hat_{t,k}(eps) = (E[|<l^IS - l^IS_eps, f>|^k; survival] e^{-pt} (k!)^{-p})^{1/k};
/// the survival-restricted expectation uses the exact spectral survival mass.
std::vector<ExpApproxRow> exp_approx_constant_estimate(
    const std::vector<const SpectralDecomposition*>& specs, const std::vector<int>& x0s,
    const Eigen::VectorXd& f, const std::vector<double>& t_grid, const std::vector<int>& k_grid,
    const std::vector<double>& eps_grid, std::int64_t n_tuples, std::uint64_t seed,
    int threads = 0);

/// Worker-count resolution: explicit value, else IML_THREADS, else hardware.
int effective_threads(int requested = 0);

/// Blocked parallel map over [0, n); fn receives [begin, end) ranges.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn, int threads = 0);

} // namespace iml
