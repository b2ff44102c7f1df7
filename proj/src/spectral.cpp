#include "iml/spectral.hpp"

#include <cmath>

namespace iml {

namespace {

constexpr double kZeroFloor = 1e-12;
constexpr double kClusterGap = 1e-9;

// Clamp kernel entries in (-kZeroFloor, 0) to zero; larger negatives are a
// numerical defect worth surfacing.
void clamp_kernel(Eigen::MatrixXd& k, const char* what) {
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            if (k(i, j) < 0.0) {
                if (k(i, j) < -kZeroFloor)
                    fail("NegativeKernel", std::string(what) + " entry below the zero floor: " +
                                               std::to_string(k(i, j)));
                k(i, j) = 0.0;
            }
        }
}

Eigen::MatrixXd spectral_kernel(const SpectralDecomposition& spec,
                                const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd& psi = spec.eigenfunctions;
    Eigen::MatrixXd k = psi * weights.asDiagonal() * psi.transpose();
    return 0.5 * (k + k.transpose());
}

} // namespace

Eigen::VectorXd SpectralDecomposition::eigenfunction_masses() const {
    return eigenfunctions.transpose() * model.measure;
}

SpectralDecomposition spectral_decompose(const SymmetricMarkovModel& model) {
    const int n = model.size();
    const Eigen::VectorXd sqrt_m = model.measure.cwiseSqrt();
    const Eigen::VectorXd inv_sqrt_m = sqrt_m.cwiseInverse();

    // Symmetrized eigenproblem for M^{1/2} (-L) M^{-1/2}; real spectrum and
    // m-orthonormal eigenfunctions by construction.
    Eigen::MatrixXd a = sqrt_m.asDiagonal() * (-model.generator) * inv_sqrt_m.asDiagonal();
    a = 0.5 * (a + a.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success)
        fail("EigensolveFailure", "self-adjoint eigensolver did not converge");

    SpectralDecomposition spec;
    spec.eigenvalues = solver.eigenvalues();
    spec.eigenfunctions = inv_sqrt_m.asDiagonal() * solver.eigenvectors();
    spec.model = model;

    // Re-orthonormalize (in the m-inner product) within numerically
    // coincident eigenvalue clusters.
    int start = 0;
    while (start < n) {
        int end = start + 1;
        while (end < n && spec.eigenvalues(end) - spec.eigenvalues(end - 1) < kClusterGap) ++end;
        for (int a1 = start; a1 < end; ++a1) {
            Eigen::VectorXd v = spec.eigenfunctions.col(a1);
            for (int b = start; b < a1; ++b) {
                const double proj =
                    (spec.eigenfunctions.col(b).array() * v.array() * model.measure.array()).sum();
                v -= proj * spec.eigenfunctions.col(b);
            }
            const double norm = std::sqrt((v.array().square() * model.measure.array()).sum());
            if (norm <= 0.0) fail("EigensolveFailure", "degenerate cluster lost rank");
            spec.eigenfunctions.col(a1) = v / norm;
        }
        start = end;
    }

    if (spec.eigenvalues(0) < 0.0) {
        if (spec.eigenvalues(0) < -1e-10)
            fail("EigensolveFailure", "negative bottom eigenvalue: " +
                                          std::to_string(spec.eigenvalues(0)));
        spec.eigenvalues(0) = 0.0;
    }
    return spec;
}

KernelMatrix heat_kernel(const SpectralDecomposition& spec, double t) {
    if (t < 0.0) fail("BadInput", "heat kernel requires t >= 0");
    const Eigen::VectorXd w = (-t * spec.eigenvalues.array()).exp();
    KernelMatrix k;
    k.values = spectral_kernel(spec, w);
    clamp_kernel(k.values, "heat kernel");
    k.time_or_level = t;
    k.kind = KernelKind::Heat;
    return k;
}

KernelMatrix resolvent_kernel(const SpectralDecomposition& spec) {
    const Eigen::VectorXd w = (1.0 + spec.eigenvalues.array()).inverse();
    KernelMatrix k;
    k.values = spectral_kernel(spec, w);
    clamp_kernel(k.values, "resolvent kernel");
    k.time_or_level = 0.0;
    k.kind = KernelKind::Resolvent;
    return k;
}

KernelMatrix truncated_resolvent_kernel(const SpectralDecomposition& spec, double delta) {
    if (!(delta > 0.0)) fail("BadInput", "truncated resolvent requires delta > 0");
    const auto shifted = 1.0 + spec.eigenvalues.array();
    const Eigen::VectorXd w = (1.0 - (-delta * shifted).exp()) / shifted;
    KernelMatrix k;
    k.values = spectral_kernel(spec, w);
    clamp_kernel(k.values, "truncated resolvent kernel");
    k.time_or_level = delta;
    k.kind = KernelKind::TruncatedResolvent;
    return k;
}

Eigen::VectorXd KernelMatrix::apply(const Eigen::VectorXd& m, const Eigen::VectorXd& f) const {
    return values * (f.cwiseProduct(m));
}

double dirichlet_energy(const SymmetricMarkovModel& model, const Eigen::VectorXd& f) {
    if (f.size() != model.size()) fail("BadInput", "vector length does not match the model");
    const Eigen::VectorXd lf = model.generator * f;
    return -(lf.array() * f.array() * model.measure.array()).sum();
}

double survival_probability(const SpectralDecomposition& spec, int x0, double t) {
    if (t < 0.0) fail("BadInput", "survival probability requires t >= 0");
    if (x0 < 0 || x0 >= spec.size()) fail("BadInput", "starting state out of range");
    const Eigen::VectorXd masses = spec.eigenfunction_masses();
    double p = 0.0;
    for (int n = 0; n < spec.size(); ++n)
        p += std::exp(-spec.eigenvalues(n) * t) * spec.eigenfunctions(x0, n) * masses(n);
    return std::min(1.0, std::max(0.0, p));
}

double log_survival_probability(const SpectralDecomposition& spec, int x0, double t) {
    if (t < 0.0) fail("BadInput", "survival probability requires t >= 0");
    if (x0 < 0 || x0 >= spec.size()) fail("BadInput", "starting state out of range");
    const Eigen::VectorXd masses = spec.eigenfunction_masses();
    const double l1 = spec.eigenvalues(0);
    double rel = 0.0; // sum_n exp(-(lambda_n - lambda_1) t) psi_n(x0) <psi_n, 1>_m
    for (int n = 0; n < spec.size(); ++n)
        rel += std::exp(-(spec.eigenvalues(n) - l1) * t) * spec.eigenfunctions(x0, n) * masses(n);
    if (rel <= 0.0) fail("BadInput", "survival probability vanished at t=" + std::to_string(t));
    return std::min(0.0, -l1 * t + std::log(rel));
}

Eigen::VectorXd apply_semigroup(const SpectralDecomposition& spec, double t,
                                const Eigen::VectorXd& f) {
    if (f.size() != spec.size()) fail("BadInput", "vector length does not match the model");
    // psi diag(e^{-lambda t}) psi^T M f, without forming the kernel.
    const Eigen::VectorXd coeff = spec.eigenfunctions.transpose() *
                                  f.cwiseProduct(spec.model.measure);
    const Eigen::VectorXd damped =
        coeff.array() * (-t * spec.eigenvalues.array()).exp();
    return spec.eigenfunctions * damped;
}

} // namespace iml
