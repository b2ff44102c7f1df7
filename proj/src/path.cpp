#include "iml/path.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace iml {

namespace {

constexpr std::int64_t kAcceptanceProbeAttempts = 1'000'000;
constexpr double kAcceptanceFloor = 1e-6;
constexpr std::int64_t kAttemptHardCap = 2'000'000'000;

// Core Gillespie step loop. With out == nullptr only the survival flag is
// computed; the RNG consumption is identical either way, so a survival probe
// and a full re-simulation from the same stream produce the same path.
bool simulate(const SymmetricMarkovModel& model, int x0, double t, RngStream& rng,
              PathSample* out) {
    int x = x0;
    double elapsed = 0.0;
    if (out) {
        out->states.clear();
        out->sojourns.clear();
        out->horizon = t;
    }

    while (true) {
        const double exit_rate = -model.generator(x, x);
        if (exit_rate <= 0.0) {
            if (out) {
                out->states.push_back(x);
                out->sojourns.push_back(t - elapsed);
            }
            return true; // absorbing conservative state
        }
        const double hold = rng.exponential(exit_rate);
        if (elapsed + hold >= t) {
            if (out) {
                out->states.push_back(x);
                out->sojourns.push_back(t - elapsed);
            }
            return true;
        }
        if (out) {
            out->states.push_back(x);
            out->sojourns.push_back(hold);
        }
        elapsed += hold;

        // Split the exit mass between jumps and killing.
        double u = rng.uniform() * exit_rate;
        int next = -1;
        for (int y = 0; y < model.size(); ++y) {
            if (y == x) continue;
            u -= model.generator(x, y);
            if (u < 0.0) {
                next = y;
                break;
            }
        }
        if (next < 0) return false; // killed
        x = next;
    }
}

double pairing(const Eigen::VectorXd& f, const DiscreteMeasure& mu) {
    return f.dot(mu.masses);
}

} // namespace

int effective_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("IML_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return std::clamp<int>(static_cast<int>(hw), 1, 16);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int threads) {
    if (n <= 0) return;
    const int workers = std::min<std::int64_t>(effective_threads(threads), n);
    if (workers <= 1 || n < 256) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t begin = w * chunk;
        const std::int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

PathSample sample_path(const SymmetricMarkovModel& model, int x0, double t, RngStream& rng) {
    if (!(t > 0.0)) fail("BadInput", "path horizon must be positive");
    if (x0 < 0 || x0 >= model.size()) fail("BadInput", "starting state out of range");
    PathSample path;
    path.survived = simulate(model, x0, t, rng, &path);
    return path;
}

DiscreteMeasure occupation_measure(const PathSample& path, int n_states) {
    if (!path.survived) fail("PathKilled", "occupation measure needs a surviving path");
    DiscreteMeasure mu;
    mu.kind = MeasureKind::Occupation;
    mu.masses = Eigen::VectorXd::Zero(n_states);
    for (std::size_t j = 0; j < path.states.size(); ++j)
        mu.masses(path.states[j]) += path.sojourns[j];
    return mu;
}

Eigen::VectorXd smoothed_occupation_density(const PathSample& path,
                                            const SpectralDecomposition& spec, double eps) {
    if (!path.survived) fail("PathKilled", "smoothed density needs a surviving path");
    if (!(eps > 0.0)) fail("BadInput", "smoothing bandwidth must be positive");
    const Eigen::MatrixXd p_eps = heat_kernel(spec, eps).values;
    Eigen::VectorXd density = Eigen::VectorXd::Zero(spec.size());
    for (std::size_t j = 0; j < path.states.size(); ++j)
        density += path.sojourns[j] * p_eps.row(path.states[j]).transpose();
    return density;
}

DiscreteMeasure intersection_measure_smoothed(const std::vector<PathSample>& paths,
                                              const std::vector<const SpectralDecomposition*>& specs,
                                              double eps) {
    if (paths.size() != specs.size() || paths.empty())
        fail("BadInput", "need one spectral decomposition per path");
    const Eigen::VectorXd& m = specs.front()->model.measure;
    DiscreteMeasure mu;
    mu.kind = MeasureKind::Intersection;
    mu.masses = m;
    for (std::size_t i = 0; i < paths.size(); ++i)
        mu.masses = mu.masses.cwiseProduct(smoothed_occupation_density(paths[i], *specs[i], eps));
    return mu;
}

DiscreteMeasure intersection_measure_exact(const std::vector<PathSample>& paths,
                                           const Eigen::VectorXd& m) {
    if (paths.empty()) fail("BadInput", "need at least one path");
    const int n = static_cast<int>(m.size());
    const int p = static_cast<int>(paths.size());
    DiscreteMeasure mu;
    mu.kind = MeasureKind::Intersection;
    mu.masses = m.array().pow(1.0 - p).matrix();
    for (const auto& path : paths)
        mu.masses = mu.masses.cwiseProduct(occupation_measure(path, n).masses);
    return mu;
}

TupleStats for_each_surviving_tuple(
    const std::vector<const SymmetricMarkovModel*>& models, const std::vector<int>& x0s,
    double t, std::int64_t n_tuples, std::uint64_t seed,
    const std::function<void(std::int64_t, const std::vector<PathSample>&)>& sink,
    int threads) {
    const int p = static_cast<int>(models.size());
    if (p < 1) fail("BadInput", "need at least one process");
    if (static_cast<int>(x0s.size()) != p)
        fail("BadInput", "need one starting state per process");

    TupleStats stats;
    std::int64_t attempt_base = 0;
    std::int64_t assigned = 0;

    while (assigned < n_tuples) {
        // Size the next probe round from the running acceptance estimate.
        double rate_guess = stats.attempts > 0
                                ? std::max(1e-6, static_cast<double>(stats.accepted) /
                                                     static_cast<double>(stats.attempts))
                                : 1.0;
        const std::int64_t want = n_tuples - assigned;
        std::int64_t round = static_cast<std::int64_t>(std::ceil(want / rate_guess * 1.2));
        round = std::clamp<std::int64_t>(round, 1024, 1 << 22);

        std::vector<std::uint8_t> survived(round, 0);
        parallel_for(
            round,
            [&](std::int64_t begin, std::int64_t end) {
                for (std::int64_t a = begin; a < end; ++a) {
                    bool ok = true;
                    for (int i = 0; i < p && ok; ++i) {
                        RngStream rng(seed, static_cast<std::uint64_t>(attempt_base + a) * p + i);
                        ok = simulate(*models[i], x0s[i], t, rng, nullptr);
                    }
                    survived[a] = ok ? 1 : 0;
                }
            },
            threads);

        // Assign tuple indices in attempt order, then re-simulate accepted
        // attempts from the same streams.
        std::vector<std::pair<std::int64_t, std::int64_t>> batch; // (attempt, tuple index)
        for (std::int64_t a = 0; a < round && assigned < n_tuples; ++a) {
            ++stats.attempts;
            if (survived[a]) {
                batch.emplace_back(attempt_base + a, assigned);
                ++assigned;
                ++stats.accepted;
            }
        }

        parallel_for(
            static_cast<std::int64_t>(batch.size()),
            [&](std::int64_t begin, std::int64_t end) {
                std::vector<PathSample> paths(p);
                for (std::int64_t b = begin; b < end; ++b) {
                    const auto [attempt, index] = batch[b];
                    for (int i = 0; i < p; ++i) {
                        const std::uint64_t stream =
                            static_cast<std::uint64_t>(attempt) * p + i;
                        RngStream rng(seed, stream);
                        paths[i].rng_stream_id = stream;
                        paths[i].survived = simulate(*models[i], x0s[i], t, rng, &paths[i]);
                    }
                    sink(index, paths);
                }
            },
            threads);

        attempt_base += round;
        if (stats.attempts >= kAcceptanceProbeAttempts &&
            static_cast<double>(stats.accepted) <
                kAcceptanceFloor * static_cast<double>(stats.attempts))
            fail("AcceptanceTooLow", "projected acceptance below 1e-6; horizon too large "
                                     "for rejection sampling");
        if (attempt_base > kAttemptHardCap)
            fail("AcceptanceTooLow", "attempt budget exhausted");
    }

    stats.acceptance_rate =
        stats.attempts > 0
            ? static_cast<double>(stats.accepted) / static_cast<double>(stats.attempts)
            : 0.0;
    return stats;
}

TupleEnsemble sample_surviving_tuples(const std::vector<const SymmetricMarkovModel*>& models,
                                      const std::vector<int>& x0s, double t,
                                      std::int64_t n_tuples, std::uint64_t seed, int threads) {
    TupleEnsemble ensemble;
    ensemble.tuples.resize(n_tuples);
    ensemble.stats = for_each_surviving_tuple(
        models, x0s, t, n_tuples, seed,
        [&](std::int64_t index, const std::vector<PathSample>& paths) {
            ensemble.tuples[index] = paths;
        },
        threads);
    return ensemble;
}

std::vector<ConvergenceRow> epsilon_convergence_diagnostic(
    const std::vector<const SpectralDecomposition*>& specs, const std::vector<int>& x0s,
    const Eigen::VectorXd& f, double t, int k, const std::vector<double>& eps_grid,
    std::int64_t n_tuples, std::uint64_t seed, int threads) {
    if (k < 1 || k > 4) fail("BadInput", "diagnostic moment order must be in [1, 4]");
    const int g = static_cast<int>(eps_grid.size());
    std::vector<const SymmetricMarkovModel*> models;
    for (const auto* spec : specs) models.push_back(&spec->model);
    const Eigen::VectorXd& m = specs.front()->model.measure;

    std::vector<double> slab(static_cast<std::size_t>(n_tuples) * g, 0.0);
    for_each_surviving_tuple(
        models, x0s, t, n_tuples, seed,
        [&](std::int64_t index, const std::vector<PathSample>& paths) {
            const double exact = pairing(f, intersection_measure_exact(paths, m));
            for (int e = 0; e < g; ++e) {
                const double smoothed =
                    pairing(f, intersection_measure_smoothed(paths, specs, eps_grid[e]));
                slab[static_cast<std::size_t>(index) * g + e] =
                    std::pow(std::abs(smoothed - exact), k);
            }
        },
        threads);

    std::vector<ConvergenceRow> rows(g);
    for (int e = 0; e < g; ++e) {
        long double sum = 0.0L, sum_sq = 0.0L;
        for (std::int64_t i = 0; i < n_tuples; ++i) {
            const double v = slab[static_cast<std::size_t>(i) * g + e];
            sum += v;
            sum_sq += static_cast<long double>(v) * v;
        }
        const double mean = static_cast<double>(sum / n_tuples);
        const double var =
            std::max(0.0L, sum_sq / n_tuples - static_cast<long double>(mean) * mean);
        rows[e] = {eps_grid[e], mean,
                   std::sqrt(static_cast<double>(var) / static_cast<double>(n_tuples))};
    }
    return rows;
}

std::vector<ExpApproxRow> exp_approx_constant_estimate(
    const std::vector<const SpectralDecomposition*>& specs, const std::vector<int>& x0s,
    const Eigen::VectorXd& f, const std::vector<double>& t_grid, const std::vector<int>& k_grid,
    const std::vector<double>& eps_grid, std::int64_t n_tuples, std::uint64_t seed,
    int threads) {
    for (int k : k_grid)
        if (k < 1 || k > 3) fail("BadInput", "constant estimate needs 1 <= k <= 3");
    const int p = static_cast<int>(specs.size());
    std::vector<const SymmetricMarkovModel*> models;
    for (const auto* spec : specs) models.push_back(&spec->model);
    const Eigen::VectorXd& m = specs.front()->model.measure;
    const int g = static_cast<int>(eps_grid.size());

    std::vector<ExpApproxRow> rows;
    for (double t : t_grid) {
        double joint_survival = 1.0;
        for (int i = 0; i < p; ++i)
            joint_survival *= survival_probability(*specs[i], x0s[i], t);

        std::vector<double> diffs(static_cast<std::size_t>(n_tuples) * g, 0.0);
        for_each_surviving_tuple(
            models, x0s, t, n_tuples, seed,
            [&](std::int64_t index, const std::vector<PathSample>& paths) {
                const double exact = pairing(f, intersection_measure_exact(paths, m));
                for (int e = 0; e < g; ++e) {
                    const double smoothed =
                        pairing(f, intersection_measure_smoothed(paths, specs, eps_grid[e]));
                    diffs[static_cast<std::size_t>(index) * g + e] = exact - smoothed;
                }
            },
            threads);

        for (int k : k_grid) {
            double kfact = 1.0;
            for (int i = 2; i <= k; ++i) kfact *= i;
            for (int e = 0; e < g; ++e) {
                long double sum = 0.0L;
                for (std::int64_t i = 0; i < n_tuples; ++i)
                    sum += std::pow(std::abs(diffs[static_cast<std::size_t>(i) * g + e]),
                                    static_cast<double>(k));
                // Conditional mean -> restricted expectation via the exact
                // joint survival mass.
                const double restricted = static_cast<double>(sum / n_tuples) * joint_survival;
                const double c_hat = std::pow(
                    restricted * std::exp(-p * t) * std::pow(kfact, -p), 1.0 / k);
                rows.push_back({t, k, eps_grid[e], c_hat});
            }
        }
    }
    return rows;
}

} // namespace iml
