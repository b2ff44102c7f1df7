#include "iml/tensor.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "iml/rng.hpp"

namespace iml {

namespace {

constexpr std::int64_t kSizeGuard = 10'000'000;

std::int64_t checked_size(int order, int extent) {
    if (order < 1) fail("BadInput", "tensor order must be >= 1");
    if (extent < 1) fail("BadInput", "tensor extent must be >= 1");
    std::int64_t total = 1;
    for (int i = 0; i < order; ++i) {
        total *= extent;
        if (total > kSizeGuard)
            fail("TooLarge", "tensor size " + std::to_string(extent) + "^" +
                                 std::to_string(order) + " exceeds the dense guard");
    }
    return total;
}

// Contract axis `axis` of `in` with the m-weighted kernel `op`.
DenseTensor contract_axis(const DenseTensor& in, int axis, const Eigen::MatrixXd& op,
                          const Eigen::VectorXd& m) {
    const int n = in.extent();
    const int k = in.order();
    DenseTensor out(k, n);

    std::int64_t stride = 1;
    for (int j = axis + 1; j < k; ++j) stride *= n;
    std::int64_t outer = 1;
    for (int j = 0; j < axis; ++j) outer *= n;

    const Eigen::MatrixXd weighted = op * m.asDiagonal(); // t(x,y) m(y)
    for (std::int64_t o = 0; o < outer; ++o) {
        const std::int64_t base = o * stride * n;
        for (std::int64_t s = 0; s < stride; ++s) {
            for (int x = 0; x < n; ++x) {
                double acc = 0.0;
                for (int y = 0; y < n; ++y)
                    acc += weighted(x, y) * in[base + y * stride + s];
                out[base + x * stride + s] = acc;
            }
        }
    }
    return out;
}

// out(x_0..x_{k-1}) = in(x_{sigmainv(0)}, ..., x_{sigmainv(k-1)}).
DenseTensor permute_axes(const DenseTensor& in, const Permutation& sigma) {
    const Permutation inv = sigma.inverse();
    const int k = in.order();
    DenseTensor out(k, in.extent());
    std::vector<int> x(k), y(k);
    for (std::int64_t flat = 0; flat < out.total_size(); ++flat) {
        const std::vector<int> idx = out.unflatten(flat);
        for (int j = 0; j < k; ++j) y[j] = idx[inv.image[j]];
        out[flat] = in.at(y);
    }
    return out;
}

} // namespace

DenseTensor::DenseTensor(int order, int extent)
    : order_(order), extent_(extent),
      values_(static_cast<std::size_t>(checked_size(order, extent)), 0.0) {}

std::int64_t DenseTensor::flatten(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != order_)
        fail("ShapeMismatch", "index rank does not match tensor order");
    std::int64_t flat = 0;
    for (int j = 0; j < order_; ++j) {
        if (idx[j] < 0 || idx[j] >= extent_) fail("BadInput", "tensor index out of range");
        flat = flat * extent_ + idx[j];
    }
    return flat;
}

std::vector<int> DenseTensor::unflatten(std::int64_t flat) const {
    std::vector<int> idx(order_);
    for (int j = order_ - 1; j >= 0; --j) {
        idx[j] = static_cast<int>(flat % extent_);
        flat /= extent_;
    }
    return idx;
}

void DenseTensor::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open " + path + " for writing");
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(order_),
                                     static_cast<std::uint32_t>(extent_)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
}

DenseTensor DenseTensor::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open " + path);
    std::uint32_t header[2];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) fail("IoError", "truncated tensor file " + path);
    DenseTensor t(static_cast<int>(header[0]), static_cast<int>(header[1]));
    in.read(reinterpret_cast<char*>(t.values_.data()),
            static_cast<std::streamsize>(t.values_.size() * sizeof(double)));
    if (!in) fail("IoError", "truncated tensor file " + path);
    return t;
}

Permutation Permutation::identity(int k) {
    Permutation p;
    p.image.resize(k);
    for (int i = 0; i < k; ++i) p.image[i] = i;
    return p;
}

void Permutation::validate() const {
    const int k = degree();
    std::vector<bool> seen(k, false);
    for (int v : image) {
        if (v < 0 || v >= k || seen[v]) fail("BadPermutation", "image is not a bijection");
        seen[v] = true;
    }
}

Permutation Permutation::inverse() const {
    validate();
    Permutation inv;
    inv.image.resize(degree());
    for (int i = 0; i < degree(); ++i) inv.image[image[i]] = i;
    return inv;
}

Permutation Permutation::then(const Permutation& other) const {
    if (other.degree() != degree()) fail("BadPermutation", "degree mismatch in composition");
    Permutation out;
    out.image.resize(degree());
    for (int i = 0; i < degree(); ++i) out.image[i] = other.image[image[i]];
    return out;
}

DenseTensor tensor_product_apply(const std::vector<Eigen::MatrixXd>& ops,
                                 const Eigen::VectorXd& m, const DenseTensor& tensor) {
    const int k = tensor.order();
    const int n = tensor.extent();
    if (static_cast<int>(ops.size()) != k)
        fail("ShapeMismatch", "need one operator per tensor axis");
    for (const auto& op : ops)
        if (op.rows() != n || op.cols() != n)
            fail("ShapeMismatch", "operator dimensions do not match the tensor extent");
    if (m.size() != n) fail("ShapeMismatch", "measure length does not match the tensor extent");

    DenseTensor out = tensor;
    for (int axis = 0; axis < k; ++axis) out = contract_axis(out, axis, ops[axis], m);
    return out;
}

DenseTensor permuted_tensor_apply(const std::vector<Eigen::MatrixXd>& ops,
                                  const Permutation& sigma, const Eigen::VectorXd& m,
                                  const DenseTensor& tensor) {
    const int k = tensor.order();
    if (sigma.degree() != k) fail("BadPermutation", "permutation degree does not match order");
    sigma.validate();
    if (static_cast<int>(ops.size()) != k)
        fail("ShapeMismatch", "need one operator per tensor axis");

    // [T_1 (x)_sigma ... (x) T_k]F (x) = [U_1 (x) ... (x) U_k]F evaluated at
    // the sigma^{-1}-permuted coordinates, with U_j = T_{sigma^{-1}(j)}.
    const Permutation inv = sigma.inverse();
    std::vector<Eigen::MatrixXd> u(k);
    for (int j = 0; j < k; ++j) u[j] = ops[inv.image[j]];
    return permute_axes(tensor_product_apply(u, m, tensor), sigma);
}

DenseTensor mixed_permuted_apply(int m_id, const Eigen::MatrixXd& smoother,
                                 const Permutation& sigma, const Eigen::VectorXd& m,
                                 const DenseTensor& tensor) {
    const int k = tensor.order();
    if (m_id < 0 || m_id > k) fail("BadInput", "identity count must lie in [0, k]");
    if (sigma.degree() != k) fail("BadPermutation", "permutation degree does not match order");
    sigma.validate();

    // U_j = id when sigma^{-1}(j) < m_id, else the smoother; identity axes
    // need no contraction. The result is read at the sigma^{-1}-permuted
    // coordinates even when every U_j is the identity.
    const Permutation inv = sigma.inverse();
    DenseTensor out = tensor;
    for (int j = 0; j < k; ++j)
        if (inv.image[j] >= m_id) out = contract_axis(out, j, smoother, m);
    return permute_axes(out, sigma);
}

bool markov_interpolation_check(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& m,
                                const Eigen::VectorXd& f, const Eigen::VectorXd& g, double p) {
    if (!(p > 1.0)) fail("BadInput", "interpolation check requires p > 1");
    if (f.minCoeff() < 0.0 || g.minCoeff() < 0.0)
        fail("NegativeInput", "f and g must be nonnegative");
    if (kernel.minCoeff() < -1e-12)
        fail("BadInput", "kernel is not positivity preserving");
    const double q = p / (p - 1.0);

    const Eigen::VectorXd t_fg = kernel * (f.cwiseProduct(g).cwiseProduct(m));
    const Eigen::VectorXd t_fp = kernel * (f.array().pow(p).matrix().cwiseProduct(m));
    const Eigen::VectorXd t_gq = kernel * (g.array().pow(q).matrix().cwiseProduct(m));

    for (Eigen::Index x = 0; x < f.size(); ++x) {
        const double rhs = std::pow(std::max(0.0, t_fp(x)), 1.0 / p) *
                           std::pow(std::max(0.0, t_gq(x)), 1.0 / q);
        if (t_fg(x) > rhs + 1e-10) return false;
    }
    return true;
}

double lp_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& m, double p) {
    if (!(p >= 1.0)) fail("BadInput", "L^p norm requires p >= 1");
    return std::pow((f.array().abs().pow(p) * m.array()).sum(), 1.0 / p);
}

double lp_contraction_check(const SpectralDecomposition& spec, double t, double p,
                            int trials, std::uint64_t seed) {
    if (!(p >= 1.0)) fail("BadInput", "contraction check requires p >= 1");
    RngStream rng(seed, 0);
    const int n = spec.size();
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd f(n);
        for (int x = 0; x < n; ++x) f(x) = rng.uniform(-1.0, 1.0);
        const double denom = lp_norm(f, spec.model.measure, p);
        if (denom < 1e-12) continue;
        const double num = lp_norm(apply_semigroup(spec, t, f), spec.model.measure, p);
        worst = std::max(worst, num / denom);
    }
    return worst;
}

} // namespace iml
