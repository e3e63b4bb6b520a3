#pragma once

#include <vector>

#include <Eigen/Core>

#include "mtfl/core.hpp"
#include "mtfl/synth.hpp"

namespace mtfl::testing {

/// Small Gaussian multi-task problem with a sparse planted model.
inline MultiTaskDataset random_dataset(Index T, Index n, Index d, std::uint64_t seed, double density = 0.2) {
    synth::Rng rng(seed);
    std::vector<Task> tasks;
    for (Index t = 0; t < T; ++t) {
        Task task{Eigen::MatrixXd(n, d), Eigen::VectorXd::Zero(n)};
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < n; ++i) task.X(i, j) = rng.normal();
        }
        for (Index j = 0; j < d; ++j) {
            if (rng.uniform() < density) task.y += task.X.col(j) * rng.normal();
        }
        for (Index i = 0; i < n; ++i) task.y(i) += 0.1 * rng.normal();
        tasks.push_back(std::move(task));
    }
    return MultiTaskDataset(std::move(tasks));
}

inline Eigen::MatrixXd random_matrix(Index r, Index c, synth::Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    }
    return m;
}

inline Eigen::VectorXd random_vector(Index n, synth::Rng& rng) { return random_matrix(n, 1, rng).col(0); }

/// The two-task, two-feature example: X_1 = [1 0], y_1 = [2], X_2 = [0 1], y_2 = [1].
inline MultiTaskDataset tiny_two_task() {
    std::vector<Task> tasks(2);
    tasks[0].X = Eigen::MatrixXd{{1.0, 0.0}};
    tasks[0].y = Eigen::VectorXd::Constant(1, 2.0);
    tasks[1].X = Eigen::MatrixXd{{0.0, 1.0}};
    tasks[1].y = Eigen::VectorXd::Constant(1, 1.0);
    return MultiTaskDataset(std::move(tasks));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace mtfl::testing
