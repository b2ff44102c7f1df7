#include "iml/moments.hpp"

#include <algorithm>
#include <map>

namespace iml {

namespace {

constexpr double kConfluentGap = 1e-6;
constexpr int kTaylorTerms = 12;

using AccMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using AccVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Confluent block: divided difference of exp(-lambda t) over nearly
// coincident sorted nodes, as a Taylor series around the node mean with
// complete homogeneous symmetric polynomials of the offsets.
double taylor_cluster(const std::vector<double>& nodes, int lo, int hi, double t) {
    const int n = hi - lo; // difference order
    double mean = 0.0;
    for (int i = lo; i <= hi; ++i) mean += nodes[i];
    mean /= (n + 1);

    // h[s] gains node d via h_s <- h_s + d h_{s-1} (ascending s reuses the
    // already-updated h_{s-1}, which telescopes the geometric sum).
    std::vector<double> h(kTaylorTerms, 0.0);
    h[0] = 1.0;
    for (int i = lo; i <= hi; ++i) {
        const double d = nodes[i] - mean;
        for (int s = 1; s < kTaylorTerms; ++s) h[s] += d * h[s - 1];
    }

    // [x_lo..x_hi] g = sum_s g^{(n+s)}(mean)/(n+s)! h_s with g^{(m)}(mean)
    // = (-t)^m exp(-mean t).
    double term = std::exp(-mean * t);
    for (int q = 1; q <= n; ++q) term *= -t / q;
    double sum = 0.0;
    for (int s = 0; s < kTaylorTerms; ++s) {
        sum += term * h[s];
        term *= -t / (n + s + 1);
    }
    return sum;
}

} // namespace

double simplex_exp_integral(const std::vector<double>& lambdas, double t) {
    if (lambdas.empty()) fail("BadInput", "need at least one exponent");
    if (t < 0.0) fail("BadInput", "simplex integral needs t >= 0");
    const int m = static_cast<int>(lambdas.size()); // k+1 nodes
    if (m == 1) return std::exp(-lambdas[0] * t);

    std::vector<double> nodes = lambdas;
    std::sort(nodes.begin(), nodes.end());

    std::vector<std::vector<double>> table(m, std::vector<double>(m, 0.0));
    for (int i = 0; i < m; ++i) table[i][i] = std::exp(-nodes[i] * t);
    for (int span = 1; span < m; ++span) {
        for (int i = 0; i + span < m; ++i) {
            const int j = i + span;
            const double gap = nodes[j] - nodes[i];
            table[i][j] = gap < kConfluentGap
                              ? taylor_cluster(nodes, i, j, t)
                              : (table[i + 1][j] - table[i][j - 1]) / gap;
        }
    }
    const int k = m - 1;
    const double value = (k % 2 == 0 ? 1.0 : -1.0) * table[0][m - 1];
    return std::max(0.0, value);
}

namespace {

// Memoized simplex integral over eigenvalue index tuples (the integral is
// symmetric in the nodes, so the key is the sorted tuple).
class SimplexCache {
public:
    SimplexCache(const Eigen::VectorXd& eigenvalues, double t)
        : eigenvalues_(eigenvalues), t_(t) {}

    double get(const std::vector<int>& tuple) {
        key_ = tuple;
        std::sort(key_.begin(), key_.end());
        const auto found = cache_.find(key_);
        if (found != cache_.end()) return found->second;
        lambdas_.resize(key_.size());
        for (std::size_t j = 0; j < key_.size(); ++j) lambdas_[j] = eigenvalues_(key_[j]);
        const double value = simplex_exp_integral(lambdas_, t_);
        cache_.emplace(key_, value);
        return value;
    }

private:
    const Eigen::VectorXd& eigenvalues_;
    double t_;
    std::map<std::vector<int>, double> cache_;
    std::vector<int> key_;
    std::vector<double> lambdas_;
};

} // namespace

DenseTensor h_t_tensor(const SpectralDecomposition& spec, int x0, double t, int k) {
    const int n = spec.size();
    if (x0 < 0 || x0 >= n) fail("BadInput", "starting state out of range");
    if (k < 1) fail("BadInput", "tensor order must be >= 1");
    double tuple_count = 1.0;
    for (int j = 0; j <= k; ++j) tuple_count *= n;
    if (tuple_count > 1e7) fail("TooLarge", "N^{k+1} exceeds the eigen-tuple guard");

    const Eigen::MatrixXd& psi = spec.eigenfunctions;
    const Eigen::VectorXd masses = spec.eigenfunction_masses();
    SimplexCache integrals(spec.eigenvalues, t);

    DenseTensor h(k, n);

    if (k == 1) {
        AccVector acc = AccVector::Zero(n);
        std::vector<int> tuple(2);
        for (int n2 = 0; n2 < n; ++n2) {
            tuple[1] = n2;
            if (masses(n2) == 0.0) continue;
            for (int n1 = 0; n1 < n; ++n1) {
                tuple[0] = n1;
                const double coeff = psi(x0, n1) * masses(n2) * integrals.get(tuple);
                if (coeff == 0.0) continue;
                acc += (coeff * psi.col(n1).array() * psi.col(n2).array())
                           .matrix()
                           .cast<long double>();
            }
        }
        for (int x = 0; x < n; ++x) h[x] = static_cast<double>(acc(x));
    } else if (k == 2) {
        AccMatrix acc = AccMatrix::Zero(n, n);
        std::vector<int> tuple(3);
        for (int n3 = 0; n3 < n; ++n3) {
            tuple[2] = n3;
            if (masses(n3) == 0.0) continue;
            for (int n2 = 0; n2 < n; ++n2) {
                tuple[1] = n2;
                const Eigen::VectorXd v = psi.col(n2).cwiseProduct(psi.col(n3));
                for (int n1 = 0; n1 < n; ++n1) {
                    tuple[0] = n1;
                    const double coeff = psi(x0, n1) * masses(n3) * integrals.get(tuple);
                    if (coeff == 0.0) continue;
                    const Eigen::VectorXd u = psi.col(n1).cwiseProduct(psi.col(n2));
                    acc += (coeff * u * v.transpose()).cast<long double>();
                }
            }
        }
        for (int x1 = 0; x1 < n; ++x1)
            for (int x2 = 0; x2 < n; ++x2)
                h[static_cast<std::int64_t>(x1) * n + x2] = static_cast<double>(acc(x1, x2));
    } else {
        std::vector<long double> acc(static_cast<std::size_t>(h.total_size()), 0.0L);
        std::int64_t eigen_total = 1;
        for (int j = 0; j <= k; ++j) eigen_total *= n;
        std::vector<int> tuple(k + 1);
        std::vector<int> idx(k);
        for (std::int64_t e = 0; e < eigen_total; ++e) {
            std::int64_t rest = e;
            // n_{k+1} outermost, remaining indices ascending.
            for (int j = 0; j <= k; ++j) {
                tuple[j] = static_cast<int>(rest % n);
                rest /= n;
            }
            const double coeff = psi(x0, tuple[0]) * masses(tuple[k]) * integrals.get(tuple);
            if (coeff == 0.0) continue;
            for (std::int64_t flat = 0; flat < h.total_size(); ++flat) {
                std::int64_t r = flat;
                for (int j = k - 1; j >= 0; --j) {
                    idx[j] = static_cast<int>(r % n);
                    r /= n;
                }
                double prod = coeff;
                for (int j = 0; j < k; ++j) prod *= psi(idx[j], tuple[j]) * psi(idx[j], tuple[j + 1]);
                acc[static_cast<std::size_t>(flat)] += prod;
            }
        }
        for (std::int64_t i = 0; i < h.total_size(); ++i)
            h[i] = static_cast<double>(acc[static_cast<std::size_t>(i)]);
    }

    for (std::int64_t i = 0; i < h.total_size(); ++i) {
        if (h[i] < 0.0) {
            if (h[i] < -1e-9)
                fail("NegativeKernel",
                     "chain tensor entry below the zero floor: " + std::to_string(h[i]));
            h[i] = 0.0;
        }
    }
    return h;
}

namespace {

std::vector<Permutation> all_orderings(int k) {
    std::vector<int> image(k);
    for (int i = 0; i < k; ++i) image[i] = i;
    std::vector<Permutation> out;
    do {
        out.push_back(Permutation{image});
    } while (std::next_permutation(image.begin(), image.end()));
    return out;
}

} // namespace

double mixed_moment_formula(const std::vector<const SpectralDecomposition*>& specs,
                            const std::vector<int>& x0s, const Eigen::VectorXd& f, double t,
                            int k, int m_exact, double eps) {
    const int p = static_cast<int>(specs.size());
    if (p < 1 || static_cast<int>(x0s.size()) != p)
        fail("BadInput", "need one starting state per process");
    if (m_exact < 0 || m_exact > k) fail("BadInput", "need 0 <= m <= k");
    const int n = specs.front()->size();
    for (const auto* spec : specs)
        if (spec->size() != n) fail("BadInput", "all processes must share the state space");
    if (f.size() != n) fail("BadInput", "functional length does not match the state space");

    double work = 1.0;
    for (int j = 0; j < k; ++j) work *= n;
    for (int j = 2; j <= k; ++j) work *= j;
    if (work > 1e7) fail("TooLarge", "N^k k! exceeds the moment guard");

    const Eigen::VectorXd& m = specs.front()->model.measure;
    const auto orderings = all_orderings(k);

    std::vector<DenseTensor> process_sums;
    process_sums.reserve(p);
    for (int i = 0; i < p; ++i) {
        const DenseTensor h = h_t_tensor(*specs[i], x0s[i], t, k);
        Eigen::MatrixXd smoother;
        if (m_exact < k) smoother = heat_kernel(*specs[i], eps).values;
        DenseTensor sum(k, n);
        for (const auto& sigma : orderings) {
            const DenseTensor term = mixed_permuted_apply(m_exact, smoother, sigma, m, h);
            for (std::int64_t a = 0; a < sum.total_size(); ++a) sum[a] += term[a];
        }
        process_sums.push_back(std::move(sum));
    }

    long double total = 0.0L;
    std::vector<int> idx(k);
    std::int64_t entries = 1;
    for (int j = 0; j < k; ++j) entries *= n;
    for (std::int64_t flat = 0; flat < entries; ++flat) {
        std::int64_t rest = flat;
        double weight = 1.0;
        for (int j = k - 1; j >= 0; --j) {
            idx[j] = static_cast<int>(rest % n);
            rest /= n;
            weight *= f(idx[j]) * m(idx[j]);
        }
        if (weight == 0.0) continue;
        double prod = weight;
        for (int i = 0; i < p; ++i) prod *= process_sums[i][flat];
        total += prod;
    }
    return static_cast<double>(total);
}

double alternating_moment_formula(const std::vector<const SpectralDecomposition*>& specs,
                                  const std::vector<int>& x0s, const Eigen::VectorXd& f,
                                  double t, int k, double eps) {
    // sum_m (-1)^m C(k,m) E[<f,l^IS>^{k-m} <f,l_eps^IS>^m] expanded with the
    // exact-coordinate count k-m.
    double sum = 0.0;
    double binom = 1.0; // C(k, m_smooth)
    for (int m_smooth = 0; m_smooth <= k; ++m_smooth) {
        const int m_exact = k - m_smooth;
        const double sign = (m_smooth % 2 == 0) ? 1.0 : -1.0;
        sum += sign * binom * mixed_moment_formula(specs, x0s, f, t, k, m_exact, eps);
        binom *= static_cast<double>(k - m_smooth) / static_cast<double>(m_smooth + 1);
    }
    return sum;
}

double h_t_lp_norm(const DenseTensor& h, const Eigen::VectorXd& m, double p) {
    if (!(p >= 1.0)) fail("BadInput", "L^p norm requires p >= 1");
    const int k = h.order();
    const int n = h.extent();
    long double total = 0.0L;
    std::vector<int> idx(k);
    for (std::int64_t flat = 0; flat < h.total_size(); ++flat) {
        std::int64_t rest = flat;
        double weight = 1.0;
        for (int j = k - 1; j >= 0; --j) {
            idx[j] = static_cast<int>(rest % n);
            rest /= n;
            weight *= m(idx[j]);
        }
        total += std::pow(std::abs(h[flat]), p) * weight;
    }
    return std::pow(static_cast<double>(total), 1.0 / p);
}

} // namespace iml
