#include "iml/acceptance.hpp"

#include <chrono>
#include <unsupported/Eigen/MatrixFunctions>

#include "iml/counting.hpp"
#include "iml/examples.hpp"
#include "iml/ldp.hpp"
#include "iml/moments.hpp"
#include "iml/path.hpp"
#include "iml/rng.hpp"
#include "iml/zoo.hpp"

namespace iml {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

SymmetricMarkovModel random_connected_model(RngStream& rng, int n, bool with_killing) {
    Eigen::VectorXd m(n);
    for (int x = 0; x < n; ++x) m(x) = rng.uniform(0.5, 2.0);

    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
    const auto add_edge = [&](int a, int b, double c) {
        // conductance c: rates c/m(a), c/m(b) keep detailed balance exact
        gen(a, b) += c / m(a);
        gen(b, a) += c / m(b);
    };
    for (int x = 0; x + 1 < n; ++x) add_edge(x, x + 1, rng.uniform(0.2, 1.5));
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = rng.uniform_int(n), b = rng.uniform_int(n);
        if (a != b) add_edge(std::min(a, b), std::max(a, b), rng.uniform(0.1, 0.8));
    }
    for (int x = 0; x < n; ++x) {
        double row = 0.0;
        for (int y = 0; y < n; ++y)
            if (y != x) row += gen(x, y);
        gen(x, x) = -row;
        if (with_killing && rng.uniform() < 0.5) gen(x, x) -= rng.uniform(0.05, 0.5);
    }

    ModelSpec spec;
    spec.measure = m;
    spec.generator = gen;
    spec.label = "random";
    return build_model(spec);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 24);
}

// Quadrature-and-expm oracle for the small-N moment checks. Everything is
// built from matrix exponentials of L, independent of the spectral path.
class MomentOracle {
public:
    explicit MomentOracle(const SymmetricMarkovModel& model) : model_(model) {}

    // Density-kernel column for one observation coordinate: smoothed uses
    // p_eps(., x); exact uses the delta density 1_x / m(x).
    Eigen::VectorXd observation(int x, double eps) const {
        const int n = model_.size();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        if (eps > 0.0) {
            const Eigen::MatrixXd k = expm(eps);
            for (int y = 0; y < n; ++y) g(y) = k(y, x) / model_.measure(x);
        } else {
            g(x) = 1.0 / model_.measure(x);
        }
        return g;
    }

    // E_{x0}[ integral_0^t g(X_s) ds ; t < zeta ].
    double single_time(const Eigen::VectorXd& g, int x0, double t) const {
        const auto integrand = [&](double s) {
            const Eigen::VectorXd survive = expm(t - s) * Eigen::VectorXd::Ones(model_.size());
            const Eigen::VectorXd inner = g.cwiseProduct(survive);
            return (expm(s) * inner)(x0);
        };
        return integrate(integrand, 0.0, t, 1e-12);
    }

    // E_{x0}[ (int g_a(X_s) ds)(int g_b(X_u) du) ; t < zeta ].
    double double_time(const Eigen::VectorXd& ga, const Eigen::VectorXd& gb, int x0,
                       double t) const {
        const auto ordered = [&](const Eigen::VectorXd& first, const Eigen::VectorXd& second) {
            const auto outer = [&](double u) {
                const Eigen::VectorXd survive =
                    expm(t - u) * Eigen::VectorXd::Ones(model_.size());
                const Eigen::VectorXd tail = second.cwiseProduct(survive);
                const auto inner = [&](double s) {
                    return (expm(s) * first.cwiseProduct(expm(u - s) * tail))(x0);
                };
                return integrate(inner, 0.0, u, 1e-12);
            };
            return integrate(outer, 0.0, t, 1e-11);
        };
        return ordered(ga, gb) + ordered(gb, ga);
    }

    const Eigen::MatrixXd& expm(double s) const {
        const auto found = cache_.find(s);
        if (found != cache_.end()) return found->second;
        const Eigen::MatrixXd value = (s * model_.generator).exp();
        return cache_.emplace(s, value).first->second;
    }

private:
    const SymmetricMarkovModel& model_;
    mutable std::map<double, Eigen::MatrixXd> cache_;
};

// Oracle for E[<f,l^IS>^{m_exact} <f,l_eps^IS>^{k-m_exact}; joint survival],
// k <= 2, via per-process quadratures.
double oracle_mixed_moment(const std::vector<const SymmetricMarkovModel*>& models,
                           const std::vector<int>& x0s, const Eigen::VectorXd& f, double t,
                           int k, int m_exact, double eps) {
    const int p = static_cast<int>(models.size());
    const int n = models.front()->size();
    const Eigen::VectorXd& m = models.front()->measure;
    std::vector<MomentOracle> oracles;
    oracles.reserve(p);
    for (const auto* model : models) oracles.emplace_back(*model);

    if (k == 1) {
        const double eps_used = m_exact == 1 ? 0.0 : eps;
        double total = 0.0;
        for (int x = 0; x < n; ++x) {
            double prod = f(x) * m(x);
            for (int i = 0; i < p; ++i)
                prod *= oracles[i].single_time(oracles[i].observation(x, eps_used), x0s[i], t);
            total += prod;
        }
        return total;
    }
    if (k != 2) fail("BadInput", "oracle supports k <= 2");

    const double eps_a = m_exact >= 1 ? 0.0 : eps;
    const double eps_b = m_exact == 2 ? 0.0 : eps;
    double total = 0.0;
    for (int xa = 0; xa < n; ++xa)
        for (int xb = 0; xb < n; ++xb) {
            double prod = f(xa) * m(xa) * f(xb) * m(xb);
            for (int i = 0; i < p && prod != 0.0; ++i)
                prod *= oracles[i].double_time(oracles[i].observation(xa, eps_a),
                                               oracles[i].observation(xb, eps_b), x0s[i], t);
            total += prod;
        }
    return total;
}

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1fs", s);
    return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: counting exactness
// ---------------------------------------------------------------------------

CriterionResult criterion_counting(int) {
    CriterionResult result{1, "counting-exactness", "pass", "", {}, 0.0};
    RngStream rng(0xC0117ULL, 0);

    const int trials = 1000;
    int nonempty = 0, mismatches = 0;
    int cor_nonempty = 0, cor_mismatches = 0;

    for (int trial = 0; trial < trials; ++trial) {
        CountingInstance inst;
        inst.p = 1 + rng.uniform_int(3);
        inst.alphabet_size = 1 + rng.uniform_int(3);
        const int s_size = 1 + rng.uniform_int(4);
        const int t_size = s_size + rng.uniform_int(3);

        std::vector<int> universe(t_size);
        for (int j = 0; j < t_size; ++j) universe[j] = j;
        for (int j = t_size - 1; j > 0; --j)
            std::swap(universe[j], universe[rng.uniform_int(j + 1)]);

        std::vector<int> s_star(universe.begin(), universe.begin() + s_size);
        std::sort(s_star.begin(), s_star.end());
        const int s1_size = rng.uniform_int(s_size + 1);
        inst.s1_star.assign(s_star.begin(), s_star.begin() + s1_size);
        inst.s2_star.assign(s_star.begin() + s1_size, s_star.end());

        for (int j = 0; j < t_size; ++j) {
            std::vector<int> label(inst.p);
            for (int i = 0; i < inst.p; ++i) label[i] = rng.uniform_int(inst.alphabet_size);
            inst.labels[j] = label;
        }

        inst.f_prime.resize(inst.p);
        for (int i = 0; i < inst.p; ++i) {
            std::vector<int> pool = universe;
            for (int j = t_size - 1; j > 0; --j)
                std::swap(pool[j], pool[rng.uniform_int(j + 1)]);
            inst.f_prime[i].assign(pool.begin(), pool.begin() + s_size);
            std::sort(inst.f_prime[i].begin(), inst.f_prime[i].end());
        }

        const bool plant = rng.uniform() < 0.5;
        if (plant) {
            // Measures induced by a random bijection tuple: nonempty for sure.
            std::vector<std::vector<int>> images(inst.p);
            for (int i = 0; i < inst.p; ++i) {
                images[i] = inst.f_prime[i];
                for (int j = s_size - 1; j > 0; --j)
                    std::swap(images[i][j], images[i][rng.uniform_int(j + 1)]);
            }
            for (int a = 0; a < s_size; ++a) {
                std::vector<int> point(inst.p);
                for (int i = 0; i < inst.p; ++i) point[i] = inst.labels[images[i][a]][i];
                inst.a_measure.add(point);
                if (a < s1_size) {
                    bool in_s1 = false;
                    for (int j : inst.s1_star) in_s1 |= (j == s_star[a]);
                    (void)in_s1;
                }
            }
            // r from the S1* positions of the same planted tuple.
            for (int a = 0; a < s_size; ++a) {
                if (std::find(inst.s1_star.begin(), inst.s1_star.end(), s_star[a]) ==
                    inst.s1_star.end())
                    continue;
                std::vector<int> point(inst.p);
                for (int i = 0; i < inst.p; ++i) point[i] = inst.labels[images[i][a]][i];
                inst.r_measure.add(point);
            }
        } else {
            // Random measures: often infeasible, occasionally nonempty.
            std::vector<std::vector<int>> atoms;
            for (int a = 0; a < s_size; ++a) {
                std::vector<int> point(inst.p);
                for (int i = 0; i < inst.p; ++i) point[i] = rng.uniform_int(inst.alphabet_size);
                inst.a_measure.add(point);
                atoms.push_back(point);
            }
            for (int j = s_size - 1; j > 0; --j)
                std::swap(atoms[j], atoms[rng.uniform_int(j + 1)]);
            for (int a = 0; a < s1_size; ++a) inst.r_measure.add(atoms[a]);
        }

        const EnumerationResult brute = enumerate_psi_bruteforce(inst);
        if (brute.count > 0) {
            ++nonempty;
            if (count_psi_closed_form(inst) != brute.count) ++mismatches;
        }

        // Corollary variant with enlarged domains W_i (shared across i) and
        // matching targets F_i.
        const int extra = rng.uniform_int(3); // |W_i \ S*| <= 2
        if (t_size >= s_size + extra) {
            std::vector<std::vector<int>> w_sets(inst.p), f_sets(inst.p);
            std::vector<int> w = s_star;
            for (int j : universe) {
                if (static_cast<int>(w.size()) >= s_size + extra) break;
                if (std::find(w.begin(), w.end(), j) == w.end()) w.push_back(j);
            }
            std::sort(w.begin(), w.end());
            for (int i = 0; i < inst.p; ++i) {
                w_sets[i] = w;
                std::vector<int> pool = universe;
                for (int j = t_size - 1; j > 0; --j)
                    std::swap(pool[j], pool[rng.uniform_int(j + 1)]);
                f_sets[i].assign(pool.begin(), pool.begin() + w.size());
            }
            const EnumerationResult tilde =
                enumerate_psi_tilde_bruteforce(inst, w_sets, f_sets);
            if (tilde.count > 0) {
                ++cor_nonempty;
                if (count_psi_tilde_closed_form(inst, w_sets) != tilde.count)
                    ++cor_mismatches;
            }
        }
    }

    result.metrics = {{"trials", trials},
                      {"nonempty", nonempty},
                      {"mismatches", mismatches},
                      {"cor_nonempty", cor_nonempty},
                      {"cor_mismatches", cor_mismatches}};
    if (mismatches > 0 || cor_mismatches > 0 || nonempty < 50 || cor_nonempty < 20)
        result.status = "fail";
    result.detail = std::to_string(trials) + " trials, " + std::to_string(nonempty) + "+" +
                    std::to_string(cor_nonempty) + " nonempty, " +
                    std::to_string(mismatches + cor_mismatches) + " mismatches";
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 2: moment-formula agreement (MC + quadrature oracle)
// ---------------------------------------------------------------------------

CriterionResult criterion_moments(int threads) {
    CriterionResult result{2, "moment-formula-agreement", "pass", "", {}, 0.0};

    const std::vector<std::pair<std::string, SymmetricMarkovModel>> models = {
        {"two-state-killed", example_two_state_killed()},
        {"birth-death-killed", example_birth_death_killed()},
        {"gasket-1", build_gasket_graph(1)},
    };
    const double t = 1.0, eps = 0.25;
    const std::int64_t n_tuples = 100000;
    const std::uint64_t seed = 20250811;

    double worst_z = 0.0;
    double worst_quad = 0.0;
    json table = json::array();

    for (const auto& [name, model] : models) {
        const SpectralDecomposition spec = spectral_decompose(model);
        Eigen::VectorXd f(model.size());
        for (int x = 0; x < model.size(); ++x)
            f(x) = 0.5 + static_cast<double>(x + 1) / model.size();

        for (int p = 1; p <= 2; ++p) {
            std::vector<const SpectralDecomposition*> specs(p, &spec);
            std::vector<const SymmetricMarkovModel*> model_ptrs(p, &model);
            std::vector<int> x0s(p, 0);

            double joint_survival = 1.0;
            for (int i = 0; i < p; ++i) joint_survival *= survival_probability(spec, 0, t);

            // One ensemble per (model, p); every (k, m) statistic reuses it.
            std::vector<double> exact_vals(n_tuples), smooth_vals(n_tuples);
            for_each_surviving_tuple(
                model_ptrs, x0s, t, n_tuples, seed,
                [&](std::int64_t index, const std::vector<PathSample>& paths) {
                    exact_vals[index] =
                        f.dot(intersection_measure_exact(paths, model.measure).masses);
                    smooth_vals[index] =
                        f.dot(intersection_measure_smoothed(paths, specs, eps).masses);
                },
                threads);

            for (int k = 1; k <= 2; ++k) {
                for (int m_exact = 0; m_exact <= k; ++m_exact) {
                    const double formula =
                        mixed_moment_formula(specs, x0s, f, t, k, m_exact, eps);

                    long double sum = 0.0L, sum_sq = 0.0L;
                    for (std::int64_t i = 0; i < n_tuples; ++i) {
                        double v = 1.0;
                        for (int a = 0; a < m_exact; ++a) v *= exact_vals[i];
                        for (int a = m_exact; a < k; ++a) v *= smooth_vals[i];
                        sum += v;
                        sum_sq += static_cast<long double>(v) * v;
                    }
                    const double mean = static_cast<double>(sum / n_tuples);
                    const double var = std::max(
                        0.0L, sum_sq / n_tuples - static_cast<long double>(mean) * mean);
                    const double se =
                        std::sqrt(static_cast<double>(var) / n_tuples) * joint_survival;
                    const double mc = mean * joint_survival;
                    const double z = se > 0.0 ? std::abs(formula - mc) / se : 0.0;
                    worst_z = std::max(worst_z, z);

                    json row = {{"model", name}, {"p", p},   {"k", k},
                                {"m", m_exact},  {"formula", formula}, {"mc", mc},
                                {"se", se},      {"z", z}};

                    if (model.size() == 2) {
                        const double oracle =
                            oracle_mixed_moment(model_ptrs, x0s, f, t, k, m_exact, eps);
                        const double diff = std::abs(formula - oracle);
                        worst_quad = std::max(worst_quad, diff);
                        row["quadrature"] = oracle;
                        row["quadrature_diff"] = diff;
                    }
                    table.push_back(row);
                }
            }
        }
    }

    result.metrics = {{"worst_z", worst_z}, {"worst_quadrature_diff", worst_quad},
                      {"table", table}};
    if (worst_z > 3.0 || worst_quad > 1e-6) result.status = "fail";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst |z| = %.2f (limit 3), worst quad diff = %.2e",
                  worst_z, worst_quad);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 3: survival-rate identity
// ---------------------------------------------------------------------------

CriterionResult criterion_survival(int) {
    CriterionResult result{3, "survival-rate-identity", "pass", "", {}, 0.0};
    std::vector<std::pair<std::string, SymmetricMarkovModel>> models;
    models.emplace_back("two-state-killed", example_two_state_killed());
    models.emplace_back("birth-death-killed", example_birth_death_killed());
    models.emplace_back("grid-1d-absorbing", build_grid({8}, Boundary::Absorbing));
    models.emplace_back("grid-2d-absorbing", build_grid({4, 4}, Boundary::Absorbing));

    const double t = 50.0;
    double worst = 0.0;
    json rows = json::array();
    for (const auto& [name, model] : models) {
        const SpectralDecomposition spec = spectral_decompose(model);
        const int x0 = model.size() / 2;
        const double rate = -log_survival_probability(spec, x0, t) / t;
        const double gap = std::abs(rate - spec.lambda1());
        worst = std::max(worst, gap);
        rows.push_back({{"model", name}, {"rate", rate}, {"lambda1", spec.lambda1()},
                        {"gap", gap}});
    }
    result.metrics = {{"worst_gap", worst}, {"rows", rows}};
    if (worst > 0.05) result.status = "fail";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst |rate - lambda1| = %.4f (limit 0.05)", worst);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 4: Varadhan / Feynman-Kac identity
// ---------------------------------------------------------------------------

CriterionResult criterion_varadhan(int) {
    CriterionResult result{4, "varadhan-feynman-kac", "pass", "", {}, 0.0};
    RngStream rng(0x7A12ADULL, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + rng.uniform_int(4);
        const SymmetricMarkovModel model = random_connected_model(rng, n, trial % 2 == 1);
        const SpectralDecomposition spec = spectral_decompose(model);
        Eigen::VectorXd f(n);
        for (int x = 0; x < n; ++x) f(x) = rng.uniform(-1.0, 1.0);
        const double theta = rng.uniform(0.1, 2.0);
        const double eps = trial % 3 == 0 ? 0.0 : rng.uniform(0.05, 0.4);
        const VaradhanCheck check = occupation_varadhan_check(spec, f, theta, eps);
        worst = std::max(worst, check.gap);
    }
    result.metrics = {{"trials", 20}, {"worst_gap", worst}};
    if (worst > 1e-7) result.status = "fail";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst gap = %.2e (limit 1e-7)", worst);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 5: variational solver certification
// ---------------------------------------------------------------------------

CriterionResult criterion_varsolve(int) {
    CriterionResult result{5, "variational-certification", "pass", "", {}, 0.0};
    const std::vector<std::pair<std::string, SymmetricMarkovModel>> models = {
        {"two-state-conservative", example_two_state_conservative()},
        {"two-state-killed", example_two_state_killed()},
        {"birth-death-killed", example_birth_death_killed()},
        {"birth-death-conservative", example_birth_death_conservative()},
    };
    const int p = 2;
    double worst_gap = 0.0, worst_convexity = 0.0, worst_zero = 0.0;

    for (const auto& [name, model] : models) {
        (void)name;
        const SpectralDecomposition spec = spectral_decompose(model);
        const Eigen::VectorXd h = Eigen::VectorXd::Ones(model.size());

        for (double theta : {0.5, 1.0, 2.0}) {
            const VariationalResult solved = variational_N(spec, theta, 0.0, h, p, true);
            worst_gap = std::max(worst_gap, solved.certificate_gap.value_or(1.0));
        }

        worst_zero = std::max(worst_zero,
                              std::abs(variational_N(spec, 0.0, 0.0, h, p).value));

        // Convexity in theta on an 11-point grid (sup of affine functions).
        std::vector<double> values;
        for (int i = 0; i <= 10; ++i)
            values.push_back(variational_N(spec, 0.25 * i, 0.0, h, p).value);
        for (int i = 0; i + 2 <= 10; ++i) {
            const double midpoint_excess =
                values[i + 1] - 0.5 * (values[i] + values[i + 2]);
            worst_convexity = std::max(worst_convexity, midpoint_excess);
            if (values[i + 1] + 1e-9 < values[i]) worst_convexity = 1.0; // monotone too
        }
    }

    result.metrics = {{"worst_certificate_gap", worst_gap},
                      {"worst_convexity_excess", worst_convexity},
                      {"worst_theta0", worst_zero}};
    if (worst_gap > 1e-6 || worst_convexity > 1e-9 || worst_zero != 0.0)
        result.status = "fail";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst grid gap = %.2e (limit 1e-6), convexity ok = %s",
                  worst_gap, worst_convexity <= 1e-9 ? "yes" : "no");
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 6: eps-convergence of the smoothed intersection functional
// ---------------------------------------------------------------------------

CriterionResult criterion_epsconv(int threads) {
    CriterionResult result{6, "eps-convergence", "pass", "", {}, 0.0};
    const SymmetricMarkovModel model = example_two_state_killed();
    const SpectralDecomposition spec = spectral_decompose(model);
    const std::vector<const SpectralDecomposition*> specs = {&spec, &spec};
    const std::vector<int> x0s = {0, 0};
    Eigen::VectorXd f(2);
    f << 1.0, 0.5;

    std::vector<double> eps_grid;
    for (int j = 2; j <= 10; ++j) eps_grid.push_back(std::pow(2.0, -j));
    const auto rows =
        epsilon_convergence_diagnostic(specs, x0s, f, 1.0, 2, eps_grid, 10000, 31337, threads);

    bool decreasing = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].estimate >= rows[i - 1].estimate) decreasing = false;
    const double last = rows.back().estimate;

    json table = json::array();
    for (const auto& row : rows)
        table.push_back({{"eps", row.eps}, {"estimate", row.estimate}, {"se", row.std_error}});
    result.metrics = {{"strictly_decreasing", decreasing}, {"value_at_2^-10", last},
                      {"table", table}};
    if (!decreasing || last > 1e-3) result.status = "fail";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "strictly decreasing = %s, value at 2^-10 = %.2e",
                  decreasing ? "yes" : "no", last);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 7: exponential-approximation constant shape
// ---------------------------------------------------------------------------

CriterionResult criterion_expapprox(int threads) {
    CriterionResult result{7, "exp-approx-constant", "pass", "", {}, 0.0};
    const SymmetricMarkovModel model = example_birth_death_killed();
    const SpectralDecomposition spec = spectral_decompose(model);
    const std::vector<const SpectralDecomposition*> specs = {&spec, &spec};
    const std::vector<int> x0s = {1, 1};
    Eigen::VectorXd f(3);
    f << 1.0, 0.6, 0.3;

    const std::vector<double> eps_grid = {0.25, 1.0 / 1024.0};
    const auto rows = exp_approx_constant_estimate(specs, x0s, f, {1.0, 2.0}, {1, 2},
                                                   eps_grid, 10000, 98765, threads);

    double worst_ratio = 0.0;
    json table = json::array();
    for (const auto& row : rows)
        table.push_back({{"t", row.t}, {"k", row.k}, {"eps", row.eps}, {"c_hat", row.c_hat}});
    for (double t : {1.0, 2.0})
        for (int k : {1, 2}) {
            double coarse = 0.0, fine = 0.0;
            for (const auto& row : rows) {
                if (row.t == t && row.k == k && row.eps == 0.25) coarse = row.c_hat;
                if (row.t == t && row.k == k && row.eps == 1.0 / 1024.0) fine = row.c_hat;
            }
            worst_ratio = std::max(worst_ratio, fine / coarse);
        }

    result.metrics = {{"worst_fine_to_coarse_ratio", worst_ratio}, {"table", table}};
    if (worst_ratio > 0.1) result.status = "fail";
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "worst C(2^-10)/C(2^-2) = %.3f (limit 0.1)", worst_ratio);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 8: spectral-dimension recovery
// ---------------------------------------------------------------------------

CriterionResult criterion_specdim(int) {
    CriterionResult result{8, "spectral-dimension", "pass", "", {}, 0.0};
    json rows = json::array();
    double worst_rel = 0.0;

    const auto check = [&](const SymmetricMarkovModel& model, double target) {
        const SpectralDecomposition spec = spectral_decompose(model);
        const double d_w = nominal_walk_exponent(model);
        const auto [t_min, t_max] = suggested_fit_window(spec, d_w);
        const SlopeFit fit = fit_trace_exponent(spec, t_min, t_max);
        const double rel = std::abs(fit.exponent_hat - target) / target;
        worst_rel = std::max(worst_rel, rel);
        rows.push_back({{"model", model.label}, {"rho_hat", fit.exponent_hat},
                        {"target", target}, {"relative_error", rel},
                        {"t_min", t_min}, {"t_max", t_max},
                        {"residual", fit.residual}});
    };

    check(build_gasket_graph(4), 2.0 * std::log(3.0) / std::log(5.0));
    check(build_grid({64}, Boundary::Reflecting), 1.0);
    check(build_grid({24, 24}, Boundary::Reflecting), 2.0);

    result.metrics = {{"worst_relative_error", worst_rel}, {"rows", rows}};
    if (worst_rel > 0.15) result.status = "fail";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst relative error = %.1f%% (limit 15%%)",
                  100.0 * worst_rel);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 9: MGF asymptotics smoke test
// ---------------------------------------------------------------------------

CriterionResult criterion_mgf(int threads) {
    CriterionResult result{9, "mgf-asymptotics", "pass", "", {}, 0.0};
    const SymmetricMarkovModel model = example_birth_death_conservative();
    const SpectralDecomposition spec = spectral_decompose(model);
    const std::vector<const SpectralDecomposition*> specs = {&spec, &spec};
    const Eigen::VectorXd h = Eigen::VectorXd::Ones(3);

    const MgfSlope mgf = mc_log_mgf_slope(specs, {1, 1}, 0.5, h, 2, 0.0, {10.0, 20.0, 40.0},
                                          200000, 424242, threads);
    const double rel = std::abs(mgf.slope - mgf.rhs_exact) / std::abs(mgf.rhs_exact);

    json points = json::array();
    for (const auto& point : mgf.points)
        points.push_back({{"t", point.t}, {"estimate", point.estimate},
                          {"se", point.std_error}, {"heavy_tail", point.heavy_tail}});
    result.metrics = {{"slope", mgf.slope}, {"rhs", mgf.rhs_exact},
                      {"relative_error", rel}, {"heavy_tail", mgf.heavy_tail},
                      {"points", points}};

    // The limit is t -> infinity; 15%..25% downgrades to a warning.
    if (mgf.heavy_tail || rel > 0.25)
        result.status = "fail";
    else if (rel > 0.15)
        result.status = "warn";
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "slope = %.4f vs rhs = %.4f (%.1f%% off, pass<=15%%, warn<=25%%)",
                  mgf.slope, mgf.rhs_exact, 100.0 * rel);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 10: operator property battery
// ---------------------------------------------------------------------------

CriterionResult criterion_operators(int) {
    CriterionResult result{10, "operator-battery", "pass", "", {}, 0.0};
    RngStream rng(0x0B5E55ULL, 0);
    int violations = 0;
    double worst_ck = 0.0, worst_trace = 0.0, worst_kernel = 0.0, worst_lp = 0.0;

    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + rng.uniform_int(4);
        const SymmetricMarkovModel model = random_connected_model(rng, n, trial % 2 == 0);
        const SpectralDecomposition spec = spectral_decompose(model);

        // Markov interpolation inequality on the heat kernel.
        {
            const double t = rng.uniform(0.05, 1.5);
            Eigen::VectorXd fv(n), gv(n);
            for (int x = 0; x < n; ++x) {
                fv(x) = rng.uniform(0.0, 2.0);
                gv(x) = rng.uniform(0.0, 2.0);
            }
            const double p = rng.uniform(1.1, 4.0);
            if (!markov_interpolation_check(heat_kernel(spec, t).values, model.measure, fv,
                                            gv, p))
                ++violations;
        }

        // L^p contraction.
        {
            const double t = rng.uniform(0.05, 2.0);
            const double p = rng.uniform(1.0, 5.0);
            const double ratio = lp_contraction_check(spec, t, p, 4, rng.next_u64());
            worst_lp = std::max(worst_lp, ratio);
            if (ratio > 1.0 + 1e-10) ++violations;
        }

        // Permutated-tensor kernel identity against the sextuple-loop form.
        {
            const int small_n = 2 + rng.uniform_int(2);
            const int k = 2 + rng.uniform_int(2);
            Eigen::VectorXd m(small_n);
            for (int x = 0; x < small_n; ++x) m(x) = rng.uniform(0.5, 1.5);
            std::vector<Eigen::MatrixXd> ops(k, Eigen::MatrixXd(small_n, small_n));
            for (auto& op : ops)
                for (int a = 0; a < small_n; ++a)
                    for (int b = 0; b < small_n; ++b) op(a, b) = rng.uniform(-1.0, 1.0);
            DenseTensor tensor(k, small_n);
            for (std::int64_t a = 0; a < tensor.total_size(); ++a)
                tensor[a] = rng.uniform(-1.0, 1.0);
            Permutation sigma = Permutation::identity(k);
            for (int j = k - 1; j > 0; --j)
                std::swap(sigma.image[j], sigma.image[rng.uniform_int(j + 1)]);

            const DenseTensor got = permuted_tensor_apply(ops, sigma, m, tensor);
            const Permutation inv = sigma.inverse();
            std::vector<int> x_idx(k), y_idx(k);
            double diff = 0.0;
            std::int64_t entries = got.total_size();
            for (std::int64_t flat = 0; flat < entries; ++flat) {
                std::int64_t rest = flat;
                for (int j = k - 1; j >= 0; --j) {
                    x_idx[j] = static_cast<int>(rest % small_n);
                    rest /= small_n;
                }
                double acc = 0.0;
                std::fill(y_idx.begin(), y_idx.end(), 0);
                while (true) {
                    double term = tensor.at(y_idx);
                    for (int i = 0; i < k; ++i)
                        term *= ops[i](x_idx[i], y_idx[sigma.image[i]]) *
                                m(y_idx[sigma.image[i]]);
                    acc += term;
                    int j = k - 1;
                    while (j >= 0 && ++y_idx[j] == small_n) y_idx[j--] = 0;
                    if (j < 0) break;
                }
                diff = std::max(diff, std::abs(acc - got[flat]));
            }
            (void)inv;
            worst_kernel = std::max(worst_kernel, diff);
            if (diff > 1e-10) ++violations;
        }

        // Semigroup / Chapman-Kolmogorov and the trace identity.
        {
            const double s = rng.uniform(0.05, 1.0), t = rng.uniform(0.05, 1.0);
            const Eigen::MatrixXd ps = heat_kernel(spec, s).values;
            const Eigen::MatrixXd pt = heat_kernel(spec, t).values;
            const Eigen::MatrixXd pst = heat_kernel(spec, s + t).values;
            const Eigen::MatrixXd composed =
                ps * model.measure.asDiagonal() * pt;
            const double ck = (composed - pst).cwiseAbs().maxCoeff();
            worst_ck = std::max(worst_ck, ck);
            if (ck > 1e-8) ++violations;

            double trace = 0.0, eigen_sum = 0.0;
            for (int x = 0; x < n; ++x) trace += pt(x, x) * model.measure(x);
            for (int a = 0; a < n; ++a) eigen_sum += std::exp(-spec.eigenvalues(a) * t);
            const double gap = std::abs(trace - eigen_sum);
            worst_trace = std::max(worst_trace, gap);
            if (gap > 1e-10) ++violations;
        }
    }

    result.metrics = {{"trials", 500},          {"violations", violations},
                      {"worst_ck", worst_ck},   {"worst_trace", worst_trace},
                      {"worst_kernel", worst_kernel}, {"worst_lp_ratio", worst_lp}};
    if (violations > 0) result.status = "fail";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "500 trials x 5 batteries, %d violations", violations);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Criterion 11: determinism of the stochastic criteria
// ---------------------------------------------------------------------------

CriterionResult criterion_determinism(int threads) {
    CriterionResult result{11, "determinism", "pass", "", {}, 0.0};
    struct Entry {
        const char* name;
        CriterionResult (*fn)(int);
    };
    const std::vector<Entry> stochastic = {
        {"counting", &criterion_counting},   {"moments", &criterion_moments},
        {"epsconv", &criterion_epsconv},     {"expapprox", &criterion_expapprox},
        {"mgf", &criterion_mgf},
    };

    json rows = json::array();
    bool all_identical = true;
    for (const auto& entry : stochastic) {
        const std::string first = entry.fn(threads).metrics.dump();
        const std::string second = entry.fn(threads).metrics.dump();
        const bool identical = first == second;
        all_identical = all_identical && identical;
        rows.push_back({{"criterion", entry.name}, {"byte_identical", identical}});
    }
    result.metrics = {{"rows", rows}};
    if (!all_identical) result.status = "fail";
    result.detail = all_identical ? "all stochastic metric sections byte-identical on replay"
                                  : "replay mismatch";
    return result;
}

} // namespace

AcceptanceSummary run_acceptance(const std::vector<std::string>& only, int threads,
                                 std::ostream* log) {
    struct Entry {
        const char* key;
        CriterionResult (*fn)(int);
    };
    const std::vector<Entry> entries = {
        {"counting", &criterion_counting}, {"moments", &criterion_moments},
        {"survival", &criterion_survival}, {"varadhan", &criterion_varadhan},
        {"varsolve", &criterion_varsolve}, {"epsconv", &criterion_epsconv},
        {"expapprox", &criterion_expapprox}, {"specdim", &criterion_specdim},
        {"mgf", &criterion_mgf},           {"operators", &criterion_operators},
        {"determinism", &criterion_determinism},
    };

    AcceptanceSummary summary;
    for (const auto& entry : entries) {
        if (!only.empty()) {
            bool wanted = false;
            for (const auto& key : only)
                if (std::string(entry.key).find(key) != std::string::npos) wanted = true;
            if (!wanted) continue;
        }
        const auto start = std::chrono::steady_clock::now();
        CriterionResult criterion;
        try {
            criterion = entry.fn(threads);
        } catch (const std::exception& e) {
            criterion.name = entry.key;
            criterion.status = "fail";
            criterion.detail = std::string("exception: ") + e.what();
        }
        criterion.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        summary.all_pass = summary.all_pass && criterion.status != "fail";
        summary.any_warn = summary.any_warn || criterion.status == "warn";
        if (log) {
            std::string tag = criterion.status == "pass"   ? "[PASS]"
                              : criterion.status == "warn" ? "[WARN]"
                                                           : "[FAIL]";
            (*log) << tag << " " << criterion.id << " " << criterion.name << " ("
                   << format_seconds(criterion.seconds) << "): " << criterion.detail
                   << std::endl;
        }
        summary.criteria.push_back(std::move(criterion));
    }
    return summary;
}

nlohmann::json acceptance_summary_json(const AcceptanceSummary& summary) {
    json doc;
    doc["all_pass"] = summary.all_pass;
    doc["any_warn"] = summary.any_warn;
    json list = json::array();
    for (const auto& criterion : summary.criteria)
        list.push_back({{"id", criterion.id},
                        {"name", criterion.name},
                        {"status", criterion.status},
                        {"detail", criterion.detail},
                        {"metrics", criterion.metrics},
                        {"seconds", criterion.seconds}});
    doc["criteria"] = list;
    return doc;
}

} // namespace iml
