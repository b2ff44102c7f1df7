#pragma once

#include <Eigen/Dense>

#include "iml/model.hpp"

namespace iml {

/// m-orthonormal eigensystem of -L, eigenvalues ascending. The model is
/// carried by value; decompositions are immutable and freely shareable.
struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;    // lambda_1 <= ... <= lambda_N, of -L
    Eigen::MatrixXd eigenfunctions; // column n = psi_n, m-orthonormal
    SymmetricMarkovModel model;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    double lambda1() const { return eigenvalues(0); }

    /// <psi_n, 1>_m = sum_x psi_n(x) m(x).
    Eigen::VectorXd eigenfunction_masses() const;
};

enum class KernelKind { Heat, Resolvent, TruncatedResolvent };

struct KernelMatrix {
    Eigen::MatrixXd values;
    double time_or_level = 0.0;
    KernelKind kind = KernelKind::Heat;

    /// m-weighted application: (Kf)(x) = sum_y k(x,y) f(y) m(y).
    Eigen::VectorXd apply(const Eigen::VectorXd& m, const Eigen::VectorXd& f) const;
};

SpectralDecomposition spectral_decompose(const SymmetricMarkovModel& model);

/// p_t(x,y) = sum_n exp(-lambda_n t) psi_n(x) psi_n(y).
KernelMatrix heat_kernel(const SpectralDecomposition& spec, double t);

/// R_1(x,y) = sum_n psi_n(x) psi_n(y) / (1 + lambda_n).
KernelMatrix resolvent_kernel(const SpectralDecomposition& spec);

/// R_{1,delta}(x,y) = sum_n psi_n(x) psi_n(y) (1 - exp(-delta(1+lambda_n))) / (1+lambda_n).
KernelMatrix truncated_resolvent_kernel(const SpectralDecomposition& spec, double delta);

/// E(f,f) = -<Lf, f>_m.
double dirichlet_energy(const SymmetricMarkovModel& model, const Eigen::VectorXd& f);

/// P_x0(t < zeta) = sum_y p_t(x0,y) m(y), clamped to [0,1].
double survival_probability(const SpectralDecomposition& spec, int x0, double t);

/// log P_x0(t < zeta), evaluated in log-domain so large lambda_1 * t does
/// not underflow.
double log_survival_probability(const SpectralDecomposition& spec, int x0, double t);

/// T_t f with f a function vector (m-weighted kernel application).
Eigen::VectorXd apply_semigroup(const SpectralDecomposition& spec, double t,
                                const Eigen::VectorXd& f);

} // namespace iml
