#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mtfl {

using Index = Eigen::Index;

enum class ErrorCode {
    DimensionMismatch,
    NonFinite,
    Empty,
    IndexOutOfRange,
    DegenerateData,
    NonPositiveLambda,
    LambdaOutOfRange,
    ZeroNormal,
    NegativeInnerProduct,
    NoConvergence,
    MaxItersExceeded,
    NonPositiveWeight,
    NonPositiveRho,
    InvalidConfig,
    InvalidGrid,
    ParseError,
    IoError,
    SolverFailure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// One learning task: design matrix (samples x features) and its response.
struct Task {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

/// Throws Error{Empty | DimensionMismatch | NonFinite} unless the tasks form a
/// well-posed multi-task dataset.
void validate_dataset(std::span<const Task> tasks);

/**
 * T tasks sharing d feature columns. Immutable after construction.
 *
 * Columns of every X_t are stored contiguously (Eigen column-major), and the
 * per-column norms are cached since screening and the solver both read them
 * on every lambda step.
 */
class MultiTaskDataset {
public:
    explicit MultiTaskDataset(std::vector<Task> tasks);

    Index num_tasks() const { return static_cast<Index>(tasks_.size()); }
    Index num_features() const { return d_; }
    Index total_samples() const { return offsets_.back(); }
    Index samples(Index t) const { return offsets_[t + 1] - offsets_[t]; }
    Index offset(Index t) const { return offsets_[t]; }
    std::span<const Index> offsets() const { return offsets_; }

    const Task& task(Index t) const { return tasks_[static_cast<std::size_t>(t)]; }
    const Eigen::MatrixXd& X(Index t) const { return task(t).X; }
    const Eigen::VectorXd& y(Index t) const { return task(t).y; }
    std::span<const Task> tasks() const { return tasks_; }

    /// d x T matrix of ||x_l^(t)||.
    const Eigen::MatrixXd& column_norms() const { return col_norms_; }
    /// d x T matrix of ||x_l^(t)||^2.
    const Eigen::MatrixXd& column_sq_norms() const { return col_sq_norms_; }
    /// (y_1; ...; y_T), length N.
    const Eigen::VectorXd& stacked_response() const { return y_stacked_; }
    /// d x T matrix of <x_l^(t), y_t>.
    const Eigen::MatrixXd& response_correlations() const { return xty_; }

    /// Dataset restricted to the given feature columns, in the given order.
    MultiTaskDataset select_features(std::span<const Index> keep) const;

private:
    std::vector<Task> tasks_;
    Index d_ = 0;
    std::vector<Index> offsets_;
    Eigen::MatrixXd col_norms_;
    Eigen::MatrixXd col_sq_norms_;
    Eigen::VectorXd y_stacked_;
    Eigen::MatrixXd xty_;
};

Eigen::VectorXd stack_response(const MultiTaskDataset& ds);

/// d x T coefficient matrix; column t is w_t, row l is w^l.
struct WeightMatrix {
    Eigen::MatrixXd values;

    static WeightMatrix zeros(const MultiTaskDataset& ds);
    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
    double row_norm(Index l) const { return values.row(l).norm(); }
    bool operator==(const WeightMatrix&) const = default;
};

void validate_weights(const MultiTaskDataset& ds, const WeightMatrix& W);

/// A vector in R^N partitioned into per-task blocks.
class DualPoint {
public:
    DualPoint() = default;
    DualPoint(Eigen::VectorXd values, std::vector<Index> offsets);
    DualPoint(Eigen::VectorXd values, const MultiTaskDataset& ds);

    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }
    std::span<const Index> offsets() const { return offsets_; }
    Index num_blocks() const { return static_cast<Index>(offsets_.size()) - 1; }

    auto block(Index t) const { return values_.segment(offsets_[t], offsets_[t + 1] - offsets_[t]); }
    auto block(Index t) { return values_.segment(offsets_[t], offsets_[t + 1] - offsets_[t]); }

    bool compatible_with(const MultiTaskDataset& ds) const;
    bool operator==(const DualPoint& o) const { return offsets_ == o.offsets_ && values_ == o.values_; }

private:
    Eigen::VectorXd values_;
    std::vector<Index> offsets_{0};
};

/// Strictly decreasing positive lambda sequence, starting at lambda_max.
class LambdaGrid {
public:
    LambdaGrid() = default;
    explicit LambdaGrid(std::vector<double> values);

    /// `points` values of lambda/lambda_max log-equispaced from 1 down to
    /// `min_ratio`, both endpoints exact.
    static LambdaGrid log_spaced(double lambda_max, std::size_t points, double min_ratio);

    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }

    /// Throws InvalidGrid unless the first value equals lambda_max to relative 1e-12.
    void check_starts_at(double lambda_max) const;

private:
    std::vector<double> values_;
};

/// Output of the screening rule at one lambda: inactive[l] <=> scores[l] < 1.
/// A score is s_l itself or a bound on it that lies on the same side of 1.
struct ScreeningMask {
    std::vector<bool> inactive;
    Eigen::VectorXd scores;
    double lambda = 0.0;

    static ScreeningMask from_scores(Eigen::VectorXd scores, double lambda);
    Index count_inactive() const;
    std::vector<Index> kept_features() const;
};

}  // namespace mtfl
