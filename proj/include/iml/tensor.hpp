#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "iml/common.hpp"
#include "iml/spectral.hpp"

namespace iml {

/// Dense order-k tensor with a common extent N per axis, row-major.
/// Guarded to N^k <= 10^7 entries.
class DenseTensor {
public:
    DenseTensor() = default;
    DenseTensor(int order, int extent);

    int order() const { return order_; }
    int extent() const { return extent_; }
    std::int64_t total_size() const { return static_cast<std::int64_t>(values_.size()); }

    double& operator[](std::int64_t flat) { return values_[flat]; }
    double operator[](std::int64_t flat) const { return values_[flat]; }

    double& at(const std::vector<int>& idx) { return values_[flatten(idx)]; }
    double at(const std::vector<int>& idx) const { return values_[flatten(idx)]; }

    std::int64_t flatten(const std::vector<int>& idx) const;
    std::vector<int> unflatten(std::int64_t flat) const;

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    /// Flat binary layout (u32 order, u32 extent, row-major f64 LE).
    void save(const std::string& path) const;
    static DenseTensor load(const std::string& path);

private:
    int order_ = 0;
    int extent_ = 0;
    std::vector<double> values_;
};

/// Permutation of {0..k-1} stored as its image array.
struct Permutation {
    std::vector<int> image; // sigma(i) = image[i]

    int degree() const { return static_cast<int>(image.size()); }
    static Permutation identity(int k);
    Permutation inverse() const;
    /// (other . this)(i) = other(this(i)).
    Permutation then(const Permutation& other) const;
    void validate() const; // throws BadPermutation
};

/// Plain tensor product of operators: axis i of the input is contracted with
/// ops[i] in the m-weighted kernel convention (Tg)(x) = sum_y t(x,y) g(y) m(y).
DenseTensor tensor_product_apply(const std::vector<Eigen::MatrixXd>& ops,
                                 const Eigen::VectorXd& m, const DenseTensor& tensor);

/// Permutated tensor product [T_1 (x)_sigma ... (x) T_k] F.
DenseTensor permuted_tensor_apply(const std::vector<Eigen::MatrixXd>& ops,
                                  const Permutation& sigma, const Eigen::VectorXd& m,
                                  const DenseTensor& tensor);

/// id^{(x)m_id} (x)_sigma T^{(x)(k-m_id)} F, with the identity axes skipped.
DenseTensor mixed_permuted_apply(int m_id, const Eigen::MatrixXd& smoother,
                                 const Permutation& sigma, const Eigen::VectorXd& m,
                                 const DenseTensor& tensor);

/// Pointwise interpolation inequality T[fg] <= (T[f^p])^{1/p} (T[g^q])^{1/q}
/// for a positivity-preserving kernel T; true iff it holds within 1e-10 slack.
bool markov_interpolation_check(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& m,
                                const Eigen::VectorXd& f, const Eigen::VectorXd& g, double p);

/// Max over random trials of ||T_t f||_p / ||f||_p (m-weighted norms).
double lp_contraction_check(const SpectralDecomposition& spec, double t, double p,
                            int trials, std::uint64_t seed);

/// m-weighted L^p norm.
double lp_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& m, double p);

} // namespace iml
