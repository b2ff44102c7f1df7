#include "iml/zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "iml/rng.hpp"
#include "iml/tensor.hpp"

namespace iml {

namespace {

struct LatticePoint {
    long long a = 0, b = 0; // position = a*(1,0) + b*(1/2, sqrt(3)/2)
    bool operator<(const LatticePoint& o) const { return std::tie(a, b) < std::tie(o.a, o.b); }
};

void gasket_triangles(const LatticePoint& p, const LatticePoint& q, const LatticePoint& r,
                      long long side, std::vector<std::array<LatticePoint, 3>>& leaves) {
    if (side == 1) {
        leaves.push_back({p, q, r});
        return;
    }
    const auto mid = [](const LatticePoint& u, const LatticePoint& v) {
        return LatticePoint{(u.a + v.a) / 2, (u.b + v.b) / 2};
    };
    const LatticePoint pq = mid(p, q), qr = mid(q, r), rp = mid(r, p);
    gasket_triangles(p, pq, rp, side / 2, leaves);
    gasket_triangles(pq, q, qr, side / 2, leaves);
    gasket_triangles(rp, qr, r, side / 2, leaves);
}

Eigen::VectorXd uniform_measure(int n) {
    return Eigen::VectorXd::Constant(n, 1.0 / n);
}

std::vector<double> log_spaced(double lo, double hi, int samples) {
    std::vector<double> out(samples);
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (int i = 0; i < samples; ++i)
        out[i] = std::exp(l0 + (l1 - l0) * i / (samples - 1));
    return out;
}

SlopeFit fit_log_log(const SpectralDecomposition& spec, double t_min, double t_max, int samples,
                     bool trace_mode) {
    if (!(t_min > 0.0) || !(t_max > t_min)) fail("BadInput", "need 0 < t_min < t_max");
    if (samples < 8) fail("BadInput", "need at least 8 samples for a slope fit");

    const auto ts = log_spaced(t_min, t_max, samples);
    std::vector<double> xs(samples), ys(samples);
    for (int i = 0; i < samples; ++i) {
        double value;
        if (trace_mode) {
            value = 0.0;
            for (int n = 0; n < spec.size(); ++n)
                value += std::exp(-spec.eigenvalues(n) * ts[i]);
        } else {
            value = heat_kernel(spec, ts[i]).values.maxCoeff();
        }
        if (!(value > 0.0)) fail("BadInput", "nonpositive heat statistic in the fit window");
        xs[i] = std::log(ts[i]);
        ys[i] = std::log(value);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < samples; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (samples * sxy - sx * sy) / (samples * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / samples;

    SlopeFit fit;
    fit.exponent_hat = -2.0 * slope;
    fit.t_min = t_min;
    fit.t_max = t_max;
    for (int i = 0; i < samples; ++i)
        fit.residual = std::max(fit.residual, std::abs(ys[i] - slope * xs[i] - intercept));
    fit.flat_window = std::abs(slope) < 0.025;
    return fit;
}

} // namespace

SymmetricMarkovModel build_gasket_graph(int level) {
    if (level < 0) fail("BadInput", "gasket level must be >= 0");
    if (level > 8) fail("LevelTooLarge", "gasket level is capped at 8");

    const long long side = 1LL << level;
    std::vector<std::array<LatticePoint, 3>> leaves;
    gasket_triangles({0, 0}, {side, 0}, {0, side}, side, leaves);

    std::map<LatticePoint, int> ids;
    std::set<std::pair<int, int>> edges;
    const auto id_of = [&](const LatticePoint& pt) {
        const auto [it, inserted] = ids.emplace(pt, static_cast<int>(ids.size()));
        (void)inserted;
        return it->second;
    };
    for (const auto& tri : leaves) {
        const int i = id_of(tri[0]), j = id_of(tri[1]), k = id_of(tri[2]);
        edges.emplace(std::min(i, j), std::max(i, j));
        edges.emplace(std::min(j, k), std::max(j, k));
        edges.emplace(std::min(k, i), std::max(k, i));
    }

    const int n = static_cast<int>(ids.size());
    std::vector<Eigen::Vector2d> pos(n);
    for (const auto& [pt, idx] : ids) {
        const double scale = 1.0 / static_cast<double>(side);
        pos[idx] = {scale * (pt.a + 0.5 * pt.b), scale * (0.8660254037844386 * pt.b)};
    }

    const double rate = std::pow(5.0, level);
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [i, j] : edges) {
        gen(i, j) = rate;
        gen(j, i) = rate;
        gen(i, i) -= rate;
        gen(j, j) -= rate;
    }

    Eigen::MatrixXd metric(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) metric(i, j) = (pos[i] - pos[j]).norm();

    ModelSpec spec;
    spec.measure = uniform_measure(n);
    spec.generator = gen;
    spec.metric = metric;
    spec.label = "gasket-" + std::to_string(level);
    return build_model(spec);
}

SymmetricMarkovModel build_grid(const std::vector<int>& dims, Boundary boundary) {
    const int k = static_cast<int>(dims.size());
    if (k < 1 || k > 3) fail("BadDims", "grid dimension must be 1, 2 or 3");
    long long n = 1;
    for (int d : dims) {
        if (d < 2) fail("BadDims", "each grid extent must be >= 2");
        n *= d;
        if (n > 20000) fail("BadDims", "grid exceeds the dense-model guard");
    }
    const int total = static_cast<int>(n);

    // Reflecting: sites j*h on [0,1], h = 1/(n_i - 1). Absorbing: interior
    // sites (j+1)*h of (0,1), h = 1/(n_i + 1); missing neighbors kill.
    std::vector<double> mesh(k), rate(k);
    for (int d = 0; d < k; ++d) {
        mesh[d] = boundary == Boundary::Reflecting ? 1.0 / (dims[d] - 1) : 1.0 / (dims[d] + 1);
        rate[d] = 1.0 / (mesh[d] * mesh[d]);
    }

    const auto unrank = [&](int flat) {
        std::vector<int> idx(k);
        for (int d = k - 1; d >= 0; --d) {
            idx[d] = flat % dims[d];
            flat /= dims[d];
        }
        return idx;
    };
    const auto rank = [&](const std::vector<int>& idx) {
        int flat = 0;
        for (int d = 0; d < k; ++d) flat = flat * dims[d] + idx[d];
        return flat;
    };

    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(total, total);
    std::vector<Eigen::Vector3d> pos(total, Eigen::Vector3d::Zero());
    for (int x = 0; x < total; ++x) {
        const auto idx = unrank(x);
        for (int d = 0; d < k; ++d) {
            const double offset = boundary == Boundary::Reflecting ? 0.0 : 1.0;
            pos[x](d) = (idx[d] + offset) * mesh[d];
            for (int dir : {-1, +1}) {
                auto nb = idx;
                nb[d] += dir;
                if (nb[d] >= 0 && nb[d] < dims[d]) {
                    gen(x, rank(nb)) += rate[d];
                    gen(x, x) -= rate[d];
                } else if (boundary == Boundary::Absorbing) {
                    gen(x, x) -= rate[d]; // killed toward the boundary
                }
            }
        }
    }

    Eigen::MatrixXd metric(total, total);
    for (int i = 0; i < total; ++i)
        for (int j = 0; j < total; ++j) metric(i, j) = (pos[i] - pos[j]).norm();

    std::string label = "grid-";
    for (int d = 0; d < k; ++d) label += (d ? "x" : "") + std::to_string(dims[d]);
    label += boundary == Boundary::Reflecting ? "-reflecting" : "-absorbing";

    ModelSpec spec;
    spec.measure = uniform_measure(total);
    spec.generator = gen;
    spec.metric = metric;
    spec.label = label;
    return build_model(spec);
}

SymmetricMarkovModel build_long_range_torus(int n, double alpha) {
    if (n < 4) fail("BadDims", "torus needs at least 4 sites");
    if (!(alpha > 0.0) || !(alpha < 2.0)) fail("BadAlpha", "alpha must lie in (0, 2)");

    Eigen::MatrixXd metric(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int hop = std::min(std::abs(i - j), n - std::abs(i - j));
            metric(i, j) = static_cast<double>(hop) / n;
        }

    // Jump kernel J(x,y) = d(x,y)^{-(1+alpha)} against m(dy); the small-jump
    // cutoff at 1/n gives the alpha-stable time scaling automatically.
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            gen(i, j) = std::pow(metric(i, j), -(1.0 + alpha)) / n;
            gen(i, i) -= gen(i, j);
        }
    }

    ModelSpec spec;
    spec.measure = uniform_measure(n);
    spec.generator = gen;
    spec.metric = metric;
    spec.label = "torus-n" + std::to_string(n) + "-alpha" + std::to_string(alpha);
    return build_model(spec);
}

SlopeFit fit_trace_exponent(const SpectralDecomposition& spec, double t_min, double t_max,
                            int samples) {
    return fit_log_log(spec, t_min, t_max, samples, true);
}

SlopeFit fit_ultracontractivity(const SpectralDecomposition& spec, double t_min, double t_max,
                                int samples) {
    return fit_log_log(spec, t_min, t_max, samples, false);
}

GreenReport check_green_conditions(const SpectralDecomposition& spec, int p,
                                   const std::vector<double>& deltas) {
    if (p < 2) fail("BadInput", "Green condition check requires p >= 2");
    GreenReport report;
    report.p = p;

    const auto sup_power_mass = [&](const Eigen::MatrixXd& kernel) {
        double sup = 0.0;
        for (int x = 0; x < spec.size(); ++x) {
            double acc = 0.0;
            for (int y = 0; y < spec.size(); ++y)
                acc += std::pow(kernel(x, y), p) * spec.model.measure(y);
            sup = std::max(sup, acc);
        }
        return sup;
    };

    report.green_sup = sup_power_mass(resolvent_kernel(spec).values);

    std::vector<double> ds = deltas;
    if (ds.empty())
        for (int j = 0; j <= 10; ++j) ds.push_back(std::pow(2.0, -j));
    std::sort(ds.rbegin(), ds.rend());
    for (double d : ds)
        report.delta_curve.emplace_back(d,
                                        sup_power_mass(truncated_resolvent_kernel(spec, d).values));
    return report;
}

std::vector<TightnessPoint> check_tightness(const SpectralDecomposition& spec,
                                            const std::vector<std::vector<int>>& exhaustion) {
    const Eigen::MatrixXd r1 = resolvent_kernel(spec).values;
    const double total_mass = spec.model.total_mass();
    std::vector<TightnessPoint> profile;
    for (const auto& kept : exhaustion) {
        std::vector<bool> in_k(spec.size(), false);
        double kept_mass = 0.0;
        for (int x : kept) {
            if (x < 0 || x >= spec.size()) fail("BadInput", "exhaustion index out of range");
            if (!in_k[x]) kept_mass += spec.model.measure(x);
            in_k[x] = true;
        }
        double sup = 0.0;
        for (int x = 0; x < spec.size(); ++x) {
            double acc = 0.0;
            for (int y = 0; y < spec.size(); ++y)
                if (!in_k[y]) acc += r1(x, y) * spec.model.measure(y);
            sup = std::max(sup, acc);
        }
        profile.push_back({kept_mass / total_mass, sup});
    }
    return profile;
}

ExtendedReal admissible_p(double d_f, double d_w) {
    if (!(d_f >= 1.0) || !(d_w >= 2.0))
        fail("BadInput", "admissible_p expects d_f >= 1 and d_w >= 2");
    if (d_f > d_w) return ExtendedReal::finite(d_f / (d_f - d_w));
    return ExtendedReal::infinity();
}

double fit_sobolev_constant(const SpectralDecomposition& spec, int p, double delta,
                            int trials, std::uint64_t seed) {
    if (p < 1) fail("BadInput", "Sobolev surrogate needs p >= 1");
    RngStream rng(seed, 0);
    double c = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd f(spec.size());
        for (int x = 0; x < spec.size(); ++x) f(x) = rng.uniform(-1.0, 1.0);
        const double n2p = lp_norm(f, spec.model.measure, 2.0 * p);
        const double n2 = lp_norm(f, spec.model.measure, 2.0);
        const double energy = dirichlet_energy(spec.model, f);
        c = std::max(c, (n2p * n2p - delta * energy) / (n2 * n2));
    }
    return c;
}

double eigen_growth_constant(const SpectralDecomposition& spec, double rho, int n_min) {
    if (!(rho > 0.0)) fail("BadInput", "eigen growth check needs rho > 0");
    double c = 1.0;
    for (int n = n_min; n <= spec.size(); ++n) {
        const double lambda = spec.eigenvalues(n - 1);
        if (!(lambda > 0.0)) fail("BadInput", "eigen growth check hit a zero eigenvalue");
        const double sup_psi = spec.eigenfunctions.col(n - 1).cwiseAbs().maxCoeff();
        const double n_pow = std::pow(static_cast<double>(n), 1.0 / rho);
        c = std::max({c, sup_psi / std::pow(lambda, rho / 2.0), lambda / n_pow, n_pow / lambda});
    }
    return c;
}

HeatBoundCheck check_gaussian_bound(const SpectralDecomposition& spec, double d_f, double d_w,
                                    double t_min, double t_max, int scan_samples) {
    if (!spec.model.metric) fail("BadInput", "Gaussian bound check needs a metric");
    const Eigen::MatrixXd& d = *spec.model.metric;
    const int n = spec.size();

    // Fit c2 on the diagonal and c3 off the diagonal using a coarse subgrid,
    // then verify the bound on a dense scan.
    HeatBoundCheck check;
    const auto fit_ts = log_spaced(t_min, t_max, 5);
    for (double t : fit_ts) {
        const Eigen::MatrixXd p = heat_kernel(spec, t).values;
        const double envelope = std::pow(t, -d_f / d_w);
        for (int x = 0; x < n; ++x)
            check.prefactor = std::max(check.prefactor, p(x, x) / envelope);
    }
    check.gauss_rate = std::numeric_limits<double>::infinity();
    for (double t : fit_ts) {
        const Eigen::MatrixXd p = heat_kernel(spec, t).values;
        const double envelope = check.prefactor * std::pow(t, -d_f / d_w);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) {
                if (d(x, y) <= 0.0 || p(x, y) <= 0.0) continue;
                const double arg = std::pow(std::pow(d(x, y), d_w) / t, 1.0 / (d_w - 1.0));
                if (p(x, y) < envelope)
                    check.gauss_rate = std::min(check.gauss_rate,
                                                -std::log(p(x, y) / envelope) / arg);
            }
    }
    if (!std::isfinite(check.gauss_rate) || check.gauss_rate <= 0.0) {
        check.holds = false;
        return check;
    }

    check.holds = true;
    for (double t : log_spaced(t_min, t_max, scan_samples)) {
        const Eigen::MatrixXd p = heat_kernel(spec, t).values;
        for (int x = 0; x < n && check.holds; ++x)
            for (int y = 0; y < n; ++y) {
                double bound = check.prefactor * std::pow(t, -d_f / d_w);
                if (d(x, y) > 0.0)
                    bound *= std::exp(-check.gauss_rate *
                                      std::pow(std::pow(d(x, y), d_w) / t, 1.0 / (d_w - 1.0)));
                if (p(x, y) > bound * (1.0 + 1e-9)) {
                    check.holds = false;
                    break;
                }
            }
        if (!check.holds) break;
    }
    return check;
}

HeatBoundCheck check_jump_bound(const SpectralDecomposition& spec, double d_f, double d_w,
                                double t_min, double t_max, int scan_samples) {
    if (!spec.model.metric) fail("BadInput", "jump bound check needs a metric");
    const Eigen::MatrixXd& d = *spec.model.metric;
    const int n = spec.size();

    HeatBoundCheck check;
    const auto envelope = [&](double t, double dist) {
        const double diag = std::pow(t, -d_f / d_w);
        if (dist <= 0.0) return diag;
        return std::min(diag, t / std::pow(dist, d_f + d_w));
    };

    for (double t : log_spaced(t_min, t_max, 5)) {
        const Eigen::MatrixXd p = heat_kernel(spec, t).values;
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                check.prefactor = std::max(check.prefactor, p(x, y) / envelope(t, d(x, y)));
    }

    check.holds = true;
    for (double t : log_spaced(t_min, t_max, scan_samples)) {
        const Eigen::MatrixXd p = heat_kernel(spec, t).values;
        for (int x = 0; x < n && check.holds; ++x)
            for (int y = 0; y < n; ++y)
                if (p(x, y) > check.prefactor * envelope(t, d(x, y)) * (1.0 + 1e-9)) {
                    check.holds = false;
                    break;
                }
        if (!check.holds) break;
    }
    return check;
}

double heat_kernel_modulus(const SpectralDecomposition& spec, double t) {
    if (!spec.model.metric) return 0.0;
    const Eigen::MatrixXd p = heat_kernel(spec, t).values;
    const Eigen::MatrixXd& d = *spec.model.metric;
    double modulus = 0.0;
    for (int x = 0; x < spec.size(); ++x)
        for (int x2 = x + 1; x2 < spec.size(); ++x2) {
            if (d(x, x2) <= 0.0) continue;
            for (int y = 0; y < spec.size(); ++y)
                modulus = std::max(modulus, std::abs(p(x, y) - p(x2, y)) / d(x, x2));
        }
    return modulus;
}

std::pair<double, double> suggested_fit_window(const SpectralDecomposition& spec,
                                               double d_w_nominal) {
    double mesh = 1.0 / spec.size();
    if (spec.model.metric) {
        mesh = std::numeric_limits<double>::infinity();
        for (int i = 0; i < spec.size(); ++i)
            for (int j = i + 1; j < spec.size(); ++j)
                if ((*spec.model.metric)(i, j) > 0.0)
                    mesh = std::min(mesh, (*spec.model.metric)(i, j));
    }
    // Below ~1/lambda_N the trace saturates at N; above ~1/lambda_2 it
    // saturates at the ground-state mass. Fit strictly in between, seeding
    // t_min with the lattice cutoff mesh^{d_w}.
    const double lambda_top = spec.eigenvalues(spec.size() - 1);
    double gap = 0.0;
    for (int n = 0; n < spec.size(); ++n)
        if (spec.eigenvalues(n) > 1e-9) {
            gap = spec.eigenvalues(n);
            break;
        }
    const double t_max = gap > 0.0 ? 0.25 / gap : 1.0;
    double t_min = std::min(std::pow(mesh, d_w_nominal), 0.25 * t_max);
    if (lambda_top > 0.0) t_min = std::max(t_min, 2.0 / lambda_top);
    if (t_max <= t_min * 4.0) return {t_min, t_min * 4.0};
    return {t_min, t_max};
}

double nominal_walk_exponent(const SymmetricMarkovModel& model) {
    const std::string& label = model.label;
    if (label.rfind("gasket-", 0) == 0) return std::log(5.0) / std::log(2.0);
    const auto pos = label.find("-alpha");
    if (pos != std::string::npos) {
        try {
            return std::stod(label.substr(pos + 6));
        } catch (...) {
        }
    }
    return 2.0;
}

AssumptionReport check_assumptions(const SpectralDecomposition& spec, int p,
                                   std::uint64_t seed) {
    AssumptionReport report;
    report.p_exponent = p;

    const GreenReport green = check_green_conditions(spec, p);
    report.green_sup = green.green_sup;
    report.green_delta_curve = green.delta_curve;

    const double d_w = nominal_walk_exponent(spec.model);
    const auto [t_min, t_max] = suggested_fit_window(spec, d_w);
    report.trace_fit = fit_trace_exponent(spec, t_min, t_max);
    report.ultracontractivity_fit = fit_ultracontractivity(spec, t_min, t_max);

    std::vector<std::vector<int>> exhaustion;
    for (int quarter = 1; quarter <= 4; ++quarter) {
        std::vector<int> kept;
        for (int x = 0; x < spec.size() * quarter / 4; ++x) kept.push_back(x);
        exhaustion.push_back(std::move(kept));
    }
    report.tightness_profile = check_tightness(spec, exhaustion);

    report.sobolev_c_1 = fit_sobolev_constant(spec, p, 1.0, 200, seed);
    report.sobolev_c_01 = fit_sobolev_constant(spec, p, 0.1, 200, seed);
    if (spec.size() >= 2 && spec.eigenvalues(1) > 1e-9)
        report.eigen_growth_c = eigen_growth_constant(spec, report.trace_fit.exponent_hat);
    report.a2_modulus = heat_kernel_modulus(spec, t_min);
    return report;
}

} // namespace iml
