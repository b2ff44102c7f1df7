#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "iml/common.hpp"

namespace iml {

/// Finite symmetric Markov model: state labels, reference measure m,
/// substochastic generator L (off-diagonal jump rates, row deficits are
/// killing rates) and an optional metric. Immutable after construction.
struct SymmetricMarkovModel {
    std::vector<std::string> states;
    Eigen::VectorXd measure;              // m(x) > 0
    Eigen::MatrixXd generator;            // L, m-symmetric, substochastic
    std::optional<Eigen::MatrixXd> metric;
    std::string label;

    int size() const { return static_cast<int>(measure.size()); }

    /// k(x) = -sum_y L[x,y] >= 0.
    double killing_rate(int x) const;

    bool conservative(double tol = 1e-12) const;

    double total_mass() const { return measure.sum(); }
};

struct ModelSpec {
    std::vector<std::string> states;
    Eigen::VectorXd measure;
    Eigen::MatrixXd generator;
    std::optional<Eigen::MatrixXd> metric;
    std::string label;
};

/// Validates and returns the model. Throws SymmetryViolation, NegativeRate,
/// Disconnected, BadMetric or BadInput.
SymmetricMarkovModel build_model(const ModelSpec& spec);

/// JSON round-trip (fields: states, m, L, optional metric, label).
std::string model_to_json(const SymmetricMarkovModel& model, int indent = 2);
SymmetricMarkovModel model_from_json(const std::string& text);
void save_model(const SymmetricMarkovModel& model, const std::string& path);
SymmetricMarkovModel load_model(const std::string& path);

} // namespace iml
