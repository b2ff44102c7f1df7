#include "iml/ldp.hpp"

#include <algorithm>
#include <cmath>

#include "iml/rng.hpp"

namespace iml {

namespace {

constexpr double kGradTol = 1e-9;

void check_probability(const Eigen::VectorXd& mu, const Eigen::VectorXd& m) {
    if (mu.size() != m.size()) fail("BadInput", "measure length does not match the model");
    if (mu.minCoeff() < 0.0) fail("NotProbability", "negative mass");
    if (std::abs(mu.sum() - 1.0) > 1e-10)
        fail("NotProbability", "total mass " + std::to_string(mu.sum()) + " is not 1");
}

double m_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& m) {
    return (a.array() * b.array() * m.array()).sum();
}

Eigen::VectorXd m_normalize(const Eigen::VectorXd& psi, const Eigen::VectorXd& m) {
    const double norm = std::sqrt(m_dot(psi, psi, m));
    if (!(norm > 0.0)) fail("BadInput", "cannot normalize the zero vector");
    return psi / norm;
}

// Objective and m-gradient of theN-functional at a unit vector psi >= 0.
struct Objective {
    const SpectralDecomposition* spec;
    double theta;
    double eps;
    const Eigen::VectorXd* h;
    int p;
    Eigen::MatrixXd smoother; // heat kernel at eps (empty when eps == 0)

    double value(const Eigen::VectorXd& psi) const {
        const Eigen::VectorXd& m = spec->model.measure;
        const Eigen::VectorXd sq = psi.cwiseProduct(psi);
        Eigen::VectorXd g = eps > 0.0 ? Eigen::VectorXd(smoother * sq.cwiseProduct(m)) : sq;
        double s = 0.0;
        for (int x = 0; x < spec->size(); ++x)
            s += std::pow(std::max(0.0, g(x)), static_cast<double>(p)) * (*h)(x)*m(x);
        const double energy = dirichlet_energy(spec->model, psi);
        const double theta_term = s > 0.0 ? theta * std::pow(s, 1.0 / p) : 0.0;
        return theta_term - p * energy + p * spec->lambda1();
    }

    Eigen::VectorXd m_gradient(const Eigen::VectorXd& psi) const {
        const Eigen::VectorXd& m = spec->model.measure;
        const Eigen::VectorXd sq = psi.cwiseProduct(psi);
        Eigen::VectorXd grad = 2.0 * p * (spec->model.generator * psi);

        Eigen::VectorXd g = eps > 0.0 ? Eigen::VectorXd(smoother * sq.cwiseProduct(m)) : sq;
        double s = 0.0;
        Eigen::VectorXd gp1 = Eigen::VectorXd::Zero(spec->size());
        for (int x = 0; x < spec->size(); ++x) {
            const double gx = std::max(0.0, g(x));
            s += std::pow(gx, static_cast<double>(p)) * (*h)(x)*m(x);
            gp1(x) = std::pow(gx, static_cast<double>(p - 1)) * (*h)(x);
        }
        if (s > 1e-300) {
            const double outer = theta * std::pow(s, 1.0 / p - 1.0);
            if (eps > 0.0) {
                const Eigen::VectorXd back = smoother * gp1.cwiseProduct(m);
                grad += 2.0 * outer * psi.cwiseProduct(back);
            } else {
                grad += 2.0 * outer * psi.cwiseProduct(gp1);
            }
        }
        return grad;
    }
};

struct AscentOutcome {
    Eigen::VectorXd psi;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

// The stationarity condition reads (pL + diag(W(psi))) psi = mu psi with
// W the linearized theta-term weight; the nonnegative maximizer is the
// principal eigenvector of that Metzler matrix. Re-solving the linearization
// exactly pushes the projected gradient to machine zero where plain ascent
// stalls at ~sqrt(machine epsilon).
struct ScfPolisher {
    const Objective* obj;

    Eigen::VectorXd potential(const Eigen::VectorXd& psi) const {
        // grad = 2 p L psi + 2 W . psi  =>  W from the theta term.
        const Eigen::VectorXd grad = obj->m_gradient(psi);
        const Eigen::VectorXd lpart =
            2.0 * obj->p * (obj->spec->model.generator * psi);
        Eigen::VectorXd w(psi.size());
        for (int x = 0; x < psi.size(); ++x)
            w(x) = psi(x) != 0.0 ? 0.5 * (grad(x) - lpart(x)) / psi(x) : 0.0;
        return w;
    }

    Eigen::VectorXd principal(const Eigen::VectorXd& w) const {
        const SymmetricMarkovModel& model = obj->spec->model;
        const Eigen::VectorXd sqrt_m = model.measure.cwiseSqrt();
        Eigen::MatrixXd a = sqrt_m.asDiagonal() *
                            (static_cast<double>(obj->p) * model.generator) *
                            sqrt_m.cwiseInverse().asDiagonal();
        a += w.asDiagonal();
        a = 0.5 * (a + a.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
        if (solver.info() != Eigen::Success)
            fail("EigensolveFailure", "polish eigensolve did not converge");
        Eigen::VectorXd top = solver.eigenvectors().col(model.size() - 1);
        if (top.sum() < 0.0) top = -top;
        return m_normalize(top.cwiseQuotient(sqrt_m).cwiseAbs(), model.measure);
    }

    AscentOutcome run(Eigen::VectorXd psi, int max_rounds) const {
        const Eigen::VectorXd& m = obj->spec->model.measure;
        AscentOutcome out;
        out.psi = psi;
        out.value = obj->value(psi);
        for (int round = 0; round < max_rounds; ++round) {
            Eigen::VectorXd grad = obj->m_gradient(out.psi);
            grad -= m_dot(grad, out.psi, m) * out.psi;
            out.grad_norm = std::sqrt(m_dot(grad, grad, m));
            out.iterations = round;
            if (out.grad_norm <= 0.5 * kGradTol * std::max(1.0, std::abs(out.value))) break;

            Eigen::VectorXd candidate = principal(potential(out.psi));
            double blend = 1.0;
            bool accepted = false;
            for (int damp = 0; damp < 6; ++damp) {
                const Eigen::VectorXd mix =
                    m_normalize(blend * candidate + (1.0 - blend) * out.psi, m);
                const double mixed_value = obj->value(mix);
                if (mixed_value >= out.value - 1e-14 * std::max(1.0, std::abs(out.value))) {
                    out.psi = mix;
                    out.value = std::max(out.value, mixed_value);
                    accepted = true;
                    break;
                }
                blend *= 0.5;
            }
            if (!accepted) break;
        }
        return out;
    }
};

// Projected gradient ascent on the L^2(m) unit sphere with an entrywise
// absolute-value projection (valid: the objective depends on psi^2 and
// E(|psi|,|psi|) <= E(psi,psi)).
AscentOutcome sphere_ascent(const Objective& obj, Eigen::VectorXd psi, int max_iters,
                            double tol_scale) {
    const Eigen::VectorXd& m = obj.spec->model.measure;
    psi = m_normalize(psi.cwiseAbs(), m);
    double value = obj.value(psi);
    double step = 0.1;

    AscentOutcome out;
    for (int iter = 0; iter < max_iters; ++iter) {
        Eigen::VectorXd grad = obj.m_gradient(psi);
        grad -= m_dot(grad, psi, m) * psi;
        const double gnorm = std::sqrt(m_dot(grad, grad, m));
        out.iterations = iter;
        out.grad_norm = gnorm;
        if (gnorm <= kGradTol * tol_scale) break;

        bool advanced = false;
        while (step > 1e-18) {
            const Eigen::VectorXd trial = m_normalize((psi + step * grad).cwiseAbs(), m);
            const double trial_value = obj.value(trial);
            if (trial_value > value + 1e-4 * step * gnorm * gnorm) {
                psi = trial;
                value = trial_value;
                step = std::min(step * 2.0, 1e6);
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if (!advanced) break; // step floor reached
    }
    out.psi = psi;
    out.value = value;
    return out;
}

} // namespace

double rate_I(const SymmetricMarkovModel& model, const Eigen::VectorXd& mu) {
    check_probability(mu, model.measure);
    const Eigen::VectorXd psi = (mu.array() / model.measure.array()).sqrt();
    return dirichlet_energy(model, psi);
}

double rate_J(const SpectralDecomposition& spec, const Eigen::VectorXd& mu) {
    return std::max(0.0, rate_I(spec.model, mu) - spec.lambda1());
}

ExtendedReal rate_bold_J(const std::vector<const SpectralDecomposition*>& specs,
                         const Eigen::VectorXd& mu,
                         const std::vector<Eigen::VectorXd>& mus) {
    const int p = static_cast<int>(specs.size());
    if (static_cast<int>(mus.size()) != p)
        fail("BadInput", "need one probability measure per process");
    const Eigen::VectorXd& m = specs.front()->model.measure;
    if (mu.size() != m.size()) fail("BadInput", "measure length does not match the model");
    if (mu.minCoeff() < -1e-15) fail("BadInput", "mu must be a nonnegative measure");

    Eigen::VectorXd product_density = Eigen::VectorXd::Ones(m.size());
    for (const auto& mu_i : mus) {
        check_probability(mu_i, m);
        product_density = product_density.cwiseProduct(
            (mu_i.array() / m.array()).matrix());
    }
    for (int x = 0; x < m.size(); ++x)
        if (std::abs(product_density(x) - mu(x) / m(x)) > 1e-9)
            return ExtendedReal::infinity();

    double total = 0.0;
    for (int i = 0; i < p; ++i) total += rate_J(*specs[i], mus[i]);
    return ExtendedReal::finite(total);
}

ExtendedReal rate_J_eps(const SpectralDecomposition& spec, const Eigen::VectorXd& nu,
                        double eps) {
    if (!(eps > 0.0)) fail("BadInput", "rate_J_eps needs eps > 0");
    if (nu.size() != spec.size()) fail("BadInput", "measure length does not match the model");
    if (nu.minCoeff() < -1e-15) fail("BadInput", "nu must be a nonnegative measure");

    const Eigen::VectorXd& m = spec.model.measure;
    const Eigen::MatrixXd smoother = heat_kernel(spec, eps).values * m.asDiagonal();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(smoother);
    if (!lu.isInvertible())
        fail("SingularSmoother", "T_eps is numerically singular at eps=" + std::to_string(eps));

    const Eigen::VectorXd nu_density = (nu.array() / m.array()).matrix();
    Eigen::VectorXd candidate = lu.solve(nu_density); // psi^2
    if (candidate.minCoeff() < -1e-9) return ExtendedReal::infinity();
    candidate = candidate.cwiseMax(0.0);

    const double mass = (candidate.array() * m.array()).sum();
    if (std::abs(mass - 1.0) > 1e-9) return ExtendedReal::infinity();

    const Eigen::VectorXd psi = candidate.cwiseSqrt();
    return ExtendedReal::finite(
        std::max(0.0, dirichlet_energy(spec.model, psi) - spec.lambda1()));
}

VariationalResult variational_N(const SpectralDecomposition& spec, double theta, double eps,
                                const Eigen::VectorXd& h, int p, bool certify) {
    if (theta < 0.0) fail("BadInput", "theta must be >= 0");
    if (eps < 0.0) fail("BadInput", "eps must be >= 0");
    if (p < 1) fail("BadInput", "p must be a positive integer");
    if (h.size() != spec.size()) fail("BadInput", "weight length does not match the model");
    if (h.minCoeff() < 0.0) fail("BadInput", "weight h must be nonnegative");

    const Eigen::VectorXd& m = spec.model.measure;
    VariationalResult result;

    if (theta == 0.0) {
        // -pE + p lambda_1 <= 0 with equality at the ground state.
        result.value = 0.0;
        result.argmax = spec.eigenfunctions.col(0).cwiseAbs();
        result.trace.starts = 0;
        if (certify && spec.size() <= 3)
            result.certificate_gap = std::abs(variational_N_grid(spec, theta, eps, h, p));
        return result;
    }

    Objective obj{&spec, theta, eps, &h, p, {}};
    if (eps > 0.0) obj.smoother = heat_kernel(spec, eps).values;

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(spec.eigenfunctions.col(0).cwiseAbs()); // ground state
    starts.push_back(Eigen::VectorXd::Ones(spec.size()));    // uniform
    {
        Eigen::VectorXd bump = h;
        const double top = h.maxCoeff();
        bump.array() += (top > 0.0 ? 0.1 * top : 1.0);
        starts.push_back(bump); // h-localized
    }
    for (int r = 0; r < 5; ++r) {
        RngStream rng(0xA5A5F00DULL, static_cast<std::uint64_t>(r));
        Eigen::VectorXd random(spec.size());
        for (int x = 0; x < spec.size(); ++x) random(x) = 0.05 + rng.uniform();
        starts.push_back(random);
    }

    double best_value = -std::numeric_limits<double>::infinity();
    double best_grad = std::numeric_limits<double>::infinity();
    int best_index = -1;
    result.trace.starts = static_cast<int>(starts.size());
    const ScfPolisher polisher{&obj};
    for (std::size_t s = 0; s < starts.size(); ++s) {
        AscentOutcome outcome = sphere_ascent(obj, starts[s], 5000, 1.0);
        outcome = polisher.run(outcome.psi, 80);
        result.trace.iterations.push_back(outcome.iterations);
        result.trace.best_per_start.push_back(outcome.value);
        // Deterministic winner: (value, start index) lexicographic.
        if (outcome.value > best_value) {
            best_value = outcome.value;
            best_grad = outcome.grad_norm;
            best_index = static_cast<int>(s);
            result.argmax = outcome.psi;
        }
    }
    (void)best_index;
    if (best_grad > kGradTol * std::max(1.0, std::abs(best_value)))
        fail("NonConvergence", "best start stalled with gradient norm " +
                                   std::to_string(best_grad));
    result.value = best_value;

    if (certify && spec.size() <= 3) {
        const double grid = variational_N_grid(spec, theta, eps, h, p);
        result.certificate_gap = std::abs(result.value - grid);
    }
    (void)m;
    return result;
}

double variational_N_grid(const SpectralDecomposition& spec, double theta, double eps,
                          const Eigen::VectorXd& h, int p) {
    const int n = spec.size();
    if (n > 3) fail("TooLarge", "grid oracle supports at most 3 states");
    const Eigen::VectorXd inv_sqrt_m = spec.model.measure.cwiseSqrt().cwiseInverse();

    Objective obj{&spec, theta, eps, &h, p, {}};
    if (eps > 0.0) obj.smoother = heat_kernel(spec, eps).values;

    // psi = c / sqrt(m) with c on the nonnegative unit sphere.
    const auto value_at = [&](const Eigen::VectorXd& c) {
        return obj.value(c.cwiseProduct(inv_sqrt_m));
    };

    if (n == 1) {
        Eigen::VectorXd c(1);
        c << 1.0;
        return value_at(c);
    }

    if (n == 2) {
        double best = -std::numeric_limits<double>::infinity(), best_phi = 0.0;
        const int coarse = 10000;
        for (int i = 0; i <= coarse; ++i) {
            const double phi = 0.5 * M_PI * i / coarse;
            Eigen::VectorXd c(2);
            c << std::cos(phi), std::sin(phi);
            if (const double v = value_at(c); v > best) {
                best = v;
                best_phi = phi;
            }
        }
        double width = 0.5 * M_PI / coarse;
        for (int round = 0; round < 24; ++round) {
            const double lo = std::max(0.0, best_phi - width);
            const double hi = std::min(0.5 * M_PI, best_phi + width);
            for (int i = 0; i <= 32; ++i) {
                const double phi = lo + (hi - lo) * i / 32;
                Eigen::VectorXd c(2);
                c << std::cos(phi), std::sin(phi);
                if (const double v = value_at(c); v > best) {
                    best = v;
                    best_phi = phi;
                }
            }
            width /= 8.0;
        }
        return best;
    }

    // n == 3: nonnegative octant in spherical coordinates.
    double best = -std::numeric_limits<double>::infinity();
    double best_a = 0.0, best_b = 0.0;
    const int coarse = 300;
    const auto sphere_point = [](double a, double b) {
        Eigen::VectorXd c(3);
        c << std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a);
        return c;
    };
    for (int i = 0; i <= coarse; ++i)
        for (int j = 0; j <= coarse; ++j) {
            const double a = 0.5 * M_PI * i / coarse;
            const double b = 0.5 * M_PI * j / coarse;
            if (const double v = value_at(sphere_point(a, b)); v > best) {
                best = v;
                best_a = a;
                best_b = b;
            }
        }
    double width = 0.5 * M_PI / coarse;
    for (int round = 0; round < 24; ++round) {
        const double alo = std::clamp(best_a - width, 0.0, 0.5 * M_PI);
        const double ahi = std::clamp(best_a + width, 0.0, 0.5 * M_PI);
        const double blo = std::clamp(best_b - width, 0.0, 0.5 * M_PI);
        const double bhi = std::clamp(best_b + width, 0.0, 0.5 * M_PI);
        for (int i = 0; i <= 16; ++i)
            for (int j = 0; j <= 16; ++j) {
                const double a = alo + (ahi - alo) * i / 16;
                const double b = blo + (bhi - blo) * j / 16;
                if (const double v = value_at(sphere_point(a, b)); v > best) {
                    best = v;
                    best_a = a;
                    best_b = b;
                }
            }
        width /= 4.0;
    }
    return best;
}

double mgf_rhs(const std::vector<const SpectralDecomposition*>& specs, double theta,
               const Eigen::VectorXd& h, int p) {
    double sum = 0.0;
    for (const auto* spec : specs) sum += variational_N(*spec, theta, 0.0, h, p).value;
    return sum / static_cast<double>(p);
}

double tilted_principal_eigenvalue(const SymmetricMarkovModel& model,
                                   const Eigen::VectorXd& v) {
    if (v.size() != model.size()) fail("BadInput", "potential length does not match the model");
    if (!v.allFinite()) fail("BadInput", "potential must be finite");
    const Eigen::VectorXd sqrt_m = model.measure.cwiseSqrt();
    Eigen::MatrixXd a = sqrt_m.asDiagonal() * model.generator *
                        sqrt_m.cwiseInverse().asDiagonal();
    a += v.asDiagonal();
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success)
        fail("EigensolveFailure", "tilted eigensolve did not converge");
    return solver.eigenvalues().maxCoeff();
}

VaradhanCheck occupation_varadhan_check(const SpectralDecomposition& spec,
                                        const Eigen::VectorXd& f, double theta, double eps) {
    if (eps < 0.0) fail("BadInput", "eps must be >= 0");
    const Eigen::VectorXd v =
        eps > 0.0 ? Eigen::VectorXd(theta * apply_semigroup(spec, eps, f)) : (theta * f).eval();

    VaradhanCheck check;
    check.lhs = tilted_principal_eigenvalue(spec.model, v) + spec.lambda1();

    // Independent route: gradient ascent on the Rayleigh objective
    // <V psi, psi>_m - E(psi, psi) over the unit sphere (sign-free).
    const Eigen::VectorXd& m = spec.model.measure;
    const auto value = [&](const Eigen::VectorXd& psi) {
        return m_dot(v.cwiseProduct(psi), psi, m) - dirichlet_energy(spec.model, psi);
    };
    const auto gradient = [&](const Eigen::VectorXd& psi) {
        return (2.0 * v.cwiseProduct(psi) + 2.0 * (spec.model.generator * psi)).eval();
    };

    double best = -std::numeric_limits<double>::infinity();
    std::vector<Eigen::VectorXd> starts{spec.eigenfunctions.col(0),
                                        Eigen::VectorXd::Ones(spec.size())};
    RngStream rng(0xBEC0DE5ULL, 0);
    Eigen::VectorXd random(spec.size());
    for (int x = 0; x < spec.size(); ++x) random(x) = rng.uniform(-1.0, 1.0);
    starts.push_back(random);

    for (const auto& start : starts) {
        Eigen::VectorXd psi = m_normalize(start, m);
        double val = value(psi);
        double step = 0.5;
        for (int iter = 0; iter < 50000; ++iter) {
            Eigen::VectorXd grad = gradient(psi);
            grad -= m_dot(grad, psi, m) * psi;
            const double gnorm = std::sqrt(m_dot(grad, grad, m));
            if (gnorm < 1e-12 * std::max(1.0, std::abs(val))) break;
            bool advanced = false;
            while (step > 1e-18) {
                const Eigen::VectorXd trial = m_normalize(psi + step * grad, m);
                const double trial_value = value(trial);
                if (trial_value > val + 1e-4 * step * gnorm * gnorm) {
                    psi = trial;
                    val = trial_value;
                    step = std::min(step * 2.0, 1e6);
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if (!advanced) break;
        }
        best = std::max(best, val);
    }

    check.rhs = best + spec.lambda1();
    check.gap = std::abs(check.lhs - check.rhs);
    return check;
}

MgfSlope mc_log_mgf_slope(const std::vector<const SpectralDecomposition*>& specs,
                          const std::vector<int>& x0s, double theta,
                          const Eigen::VectorXd& h, int p, double eps,
                          const std::vector<double>& t_grid, std::int64_t n_tuples,
                          std::uint64_t seed, int threads) {
    if (t_grid.size() < 3) fail("BadInput", "need at least 3 horizon points");
    if (!std::is_sorted(t_grid.begin(), t_grid.end()))
        fail("BadInput", "horizon grid must be ascending");

    std::vector<const SymmetricMarkovModel*> models;
    for (const auto* spec : specs) models.push_back(&spec->model);
    const Eigen::VectorXd& m = specs.front()->model.measure;

    MgfSlope out;
    for (double t : t_grid) {
        std::vector<double> exponents(n_tuples, 0.0);
        for_each_surviving_tuple(
            models, x0s, t, n_tuples, seed,
            [&](std::int64_t index, const std::vector<PathSample>& paths) {
                const double v =
                    eps > 0.0
                        ? h.dot(intersection_measure_smoothed(paths, specs, eps).masses)
                        : h.dot(intersection_measure_exact(paths, m).masses);
                exponents[index] = theta * std::pow(std::max(0.0, v), 1.0 / p);
            },
            threads);

        const double shift = *std::max_element(exponents.begin(), exponents.end());
        long double sum = 0.0L, sum_sq = 0.0L;
        for (double a : exponents) {
            const double w = std::exp(a - shift);
            sum += w;
            sum_sq += static_cast<long double>(w) * w;
        }
        const double mean = static_cast<double>(sum / n_tuples);
        const double var =
            std::max(0.0L, sum_sq / n_tuples - static_cast<long double>(mean) * mean);
        const double se_log = std::sqrt(static_cast<double>(var) / n_tuples) / mean;

        // Weight concentration gate: top 1% of weights vs the total.
        std::vector<double> sorted = exponents;
        std::sort(sorted.rbegin(), sorted.rend());
        const std::int64_t top = std::max<std::int64_t>(1, n_tuples / 100);
        long double top_sum = 0.0L;
        for (std::int64_t i = 0; i < top; ++i) top_sum += std::exp(sorted[i] - shift);
        const bool heavy = static_cast<double>(top_sum) > 0.5 * static_cast<double>(sum);

        MgfPoint point;
        point.t = t;
        point.estimate = (shift + std::log(mean)) / t;
        point.std_error = se_log / t;
        point.heavy_tail = heavy;
        out.heavy_tail = out.heavy_tail || heavy;
        out.points.push_back(point);
    }

    // Polynomial extrapolation to 1/t = 0 (Neville).
    std::vector<double> xs, ys;
    for (const auto& point : out.points) {
        xs.push_back(1.0 / point.t);
        ys.push_back(point.estimate);
    }
    const int np = static_cast<int>(xs.size());
    for (int j = 1; j < np; ++j)
        for (int i = 0; i + j < np; ++i)
            ys[i] = (xs[i + j] * ys[i] - xs[i] * ys[i + 1]) / (xs[i + j] - xs[i]);
    out.slope = ys[0];

    out.rhs_exact = mgf_rhs(specs, theta, h, p);
    if (eps > 0.0) {
        double sum = 0.0;
        for (const auto* spec : specs)
            sum += variational_N(*spec, theta, eps, h, p).value;
        out.rhs_smoothed = sum / p;
    }
    return out;
}

} // namespace iml
