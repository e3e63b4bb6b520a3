#include "mtfl/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtfl {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
        case ErrorCode::LambdaOutOfRange: return "LambdaOutOfRange";
        case ErrorCode::ZeroNormal: return "ZeroNormal";
        case ErrorCode::NegativeInnerProduct: return "NegativeInnerProduct";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
        case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
        case ErrorCode::NonPositiveRho: return "NonPositiveRho";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SolverFailure: return "SolverFailure";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void validate_dataset(std::span<const Task> tasks) {
    if (tasks.empty()) {
        throw Error(ErrorCode::Empty, "dataset has no tasks");
    }
    const Index d = tasks.front().X.cols();
    if (d == 0) {
        throw Error(ErrorCode::Empty, "dataset has no features");
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& task = tasks[t];
        if (task.X.rows() == 0) {
            throw Error(ErrorCode::Empty, "task " + std::to_string(t) + " has no samples");
        }
        if (task.X.cols() != d) {
            std::ostringstream os;
            os << "task " << t << " has " << task.X.cols() << " columns, expected " << d;
            throw Error(ErrorCode::DimensionMismatch, os.str());
        }
        if (task.y.size() != task.X.rows()) {
            std::ostringstream os;
            os << "task " << t << " has " << task.X.rows() << " rows but " << task.y.size() << " responses";
            throw Error(ErrorCode::DimensionMismatch, os.str());
        }
        if (!task.X.allFinite() || !task.y.allFinite()) {
            throw Error(ErrorCode::NonFinite, "task " + std::to_string(t) + " contains NaN or infinite values");
        }
    }
}

MultiTaskDataset::MultiTaskDataset(std::vector<Task> tasks) : tasks_(std::move(tasks)) {
    validate_dataset(tasks_);
    d_ = tasks_.front().X.cols();
    const Index T = num_tasks();
    offsets_.assign(tasks_.size() + 1, 0);
    for (Index t = 0; t < T; ++t) {
        offsets_[t + 1] = offsets_[t] + tasks_[t].X.rows();
    }
    col_sq_norms_.resize(d_, T);
    for (Index t = 0; t < T; ++t) {
        col_sq_norms_.col(t) = tasks_[t].X.colwise().squaredNorm().transpose();
    }
    col_norms_ = col_sq_norms_.cwiseSqrt();
    y_stacked_.resize(total_samples());
    for (Index t = 0; t < T; ++t) {
        y_stacked_.segment(offsets_[t], samples(t)) = tasks_[t].y;
    }
    xty_.resize(d_, T);
    for (Index t = 0; t < T; ++t) {
        xty_.col(t).noalias() = tasks_[t].X.transpose() * tasks_[t].y;
    }
}

MultiTaskDataset MultiTaskDataset::select_features(std::span<const Index> keep) const {
    std::vector<Task> out;
    out.reserve(tasks_.size());
    for (const auto& task : tasks_) {
        Task sub;
        sub.X.resize(task.X.rows(), static_cast<Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const Index l = keep[j];
            if (l < 0 || l >= d_) {
                throw Error(ErrorCode::IndexOutOfRange, "feature index " + std::to_string(l));
            }
            sub.X.col(static_cast<Index>(j)) = task.X.col(l);
        }
        sub.y = task.y;
        out.push_back(std::move(sub));
    }
    return MultiTaskDataset(std::move(out));
}

Eigen::VectorXd stack_response(const MultiTaskDataset& ds) { return ds.stacked_response(); }

WeightMatrix WeightMatrix::zeros(const MultiTaskDataset& ds) {
    return WeightMatrix{Eigen::MatrixXd::Zero(ds.num_features(), ds.num_tasks())};
}

void validate_weights(const MultiTaskDataset& ds, const WeightMatrix& W) {
    if (W.rows() != ds.num_features() || W.cols() != ds.num_tasks()) {
        std::ostringstream os;
        os << "weight matrix is " << W.rows() << "x" << W.cols() << ", dataset needs " << ds.num_features()
           << "x" << ds.num_tasks();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (!W.values.allFinite()) {
        throw Error(ErrorCode::NonFinite, "weight matrix contains NaN or infinite values");
    }
}

DualPoint::DualPoint(Eigen::VectorXd values, std::vector<Index> offsets)
    : values_(std::move(values)), offsets_(std::move(offsets)) {
    if (offsets_.empty() || offsets_.front() != 0) {
        throw Error(ErrorCode::DimensionMismatch, "block offsets must start at 0");
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) {
        if (offsets_[i] < offsets_[i - 1]) {
            throw Error(ErrorCode::DimensionMismatch, "block offsets must be nondecreasing");
        }
    }
    if (offsets_.back() != values_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "block offsets do not cover the vector");
    }
}

DualPoint::DualPoint(Eigen::VectorXd values, const MultiTaskDataset& ds)
    : DualPoint(std::move(values), std::vector<Index>(ds.offsets().begin(), ds.offsets().end())) {}

bool DualPoint::compatible_with(const MultiTaskDataset& ds) const {
    const auto o = ds.offsets();
    return std::equal(offsets_.begin(), offsets_.end(), o.begin(), o.end());
}

LambdaGrid::LambdaGrid(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw Error(ErrorCode::InvalidGrid, "lambda grid is empty");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!(values_[k] > 0.0) || !std::isfinite(values_[k])) {
            throw Error(ErrorCode::InvalidGrid, "lambda values must be positive and finite");
        }
        if (k > 0 && !(values_[k] < values_[k - 1])) {
            throw Error(ErrorCode::InvalidGrid, "lambda grid must be strictly decreasing");
        }
    }
}

LambdaGrid LambdaGrid::log_spaced(double lambda_max, std::size_t points, double min_ratio) {
    if (points == 0 || !(lambda_max > 0.0) || !(min_ratio > 0.0) || (points > 1 && !(min_ratio < 1.0))) {
        throw Error(ErrorCode::InvalidGrid, "need points >= 1, lambda_max > 0 and 0 < min_ratio < 1");
    }
    std::vector<double> v(points);
    v[0] = lambda_max;
    if (points > 1) {
        const double log_min = std::log(min_ratio);
        const double denom = static_cast<double>(points - 1);
        for (std::size_t k = 1; k + 1 < points; ++k) {
            v[k] = lambda_max * std::exp(log_min * static_cast<double>(k) / denom);
        }
        v[points - 1] = lambda_max * min_ratio;
    }
    return LambdaGrid(std::move(v));
}

void LambdaGrid::check_starts_at(double lambda_max) const {
    if (std::abs(values_.front() - lambda_max) > 1e-12 * lambda_max) {
        throw Error(ErrorCode::InvalidGrid, "lambda grid must start at lambda_max");
    }
}

ScreeningMask ScreeningMask::from_scores(Eigen::VectorXd scores, double lambda) {
    ScreeningMask m;
    m.inactive.resize(static_cast<std::size_t>(scores.size()));
    for (Index l = 0; l < scores.size(); ++l) {
        m.inactive[static_cast<std::size_t>(l)] = scores[l] < 1.0;
    }
    m.scores = std::move(scores);
    m.lambda = lambda;
    return m;
}

Index ScreeningMask::count_inactive() const {
    return static_cast<Index>(std::count(inactive.begin(), inactive.end(), true));
}

std::vector<Index> ScreeningMask::kept_features() const {
    std::vector<Index> keep;
    for (std::size_t l = 0; l < inactive.size(); ++l) {
        if (!inactive[l]) keep.push_back(static_cast<Index>(l));
    }
    return keep;
}

}  // namespace mtfl
