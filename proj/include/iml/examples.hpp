#pragma once

#include "iml/model.hpp"

namespace iml {

/// Standard small instances used across the test batteries and the
/// acceptance runner.

inline SymmetricMarkovModel example_two_state_conservative() {
    ModelSpec spec;
    spec.measure = Eigen::Vector2d(1.0, 1.0);
    spec.generator = Eigen::MatrixXd{{-1.0, 1.0}, {1.0, -1.0}};
    spec.label = "two-state-conservative";
    return build_model(spec);
}

inline SymmetricMarkovModel example_two_state_killed() {
    ModelSpec spec;
    spec.measure = Eigen::Vector2d(1.0, 1.0);
    spec.generator = Eigen::MatrixXd{{-1.5, 1.0}, {1.0, -1.2}};
    spec.label = "two-state-killed";
    return build_model(spec);
}

/// Birth-death chain on 3 states, unit jump rates, killing at the last state.
inline SymmetricMarkovModel example_birth_death_killed() {
    ModelSpec spec;
    spec.measure = Eigen::Vector3d(1.0, 1.0, 1.0);
    spec.generator =
        Eigen::MatrixXd{{-1.0, 1.0, 0.0}, {1.0, -2.0, 1.0}, {0.0, 1.0, -1.5}};
    spec.label = "birth-death-3-killed";
    return build_model(spec);
}

inline SymmetricMarkovModel example_birth_death_conservative() {
    ModelSpec spec;
    spec.measure = Eigen::Vector3d(1.0, 1.0, 1.0);
    spec.generator =
        Eigen::MatrixXd{{-1.0, 1.0, 0.0}, {1.0, -2.0, 1.0}, {0.0, 1.0, -1.0}};
    spec.label = "birth-death-3-conservative";
    return build_model(spec);
}

} // namespace iml
