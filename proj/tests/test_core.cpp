#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "mtfl/io.hpp"

using namespace mtfl;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an mtfl::Error");
    return ErrorCode::Empty;
}

std::filesystem::path scratch_dir(const char* name) {
    auto p = std::filesystem::temp_directory_path() / ("mtfl_test_" + std::string(name));
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("validate_dataset") {
    synth::Rng rng(1);
    std::vector<Task> ok{{testing::random_matrix(3, 5, rng), testing::random_vector(3, rng)},
                         {testing::random_matrix(3, 5, rng), testing::random_vector(3, rng)}};
    CHECK_NOTHROW(validate_dataset(ok));

    auto bad = ok;
    bad[1].X = testing::random_matrix(3, 4, rng);
    CHECK(code_of([&] { validate_dataset(bad); }) == ErrorCode::DimensionMismatch);

    std::vector<Task> nan{{testing::random_matrix(3, 5, rng), testing::random_vector(3, rng)}};
    nan[0].X(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { validate_dataset(nan); }) == ErrorCode::NonFinite);

    CHECK(code_of([&] { validate_dataset(std::vector<Task>{}); }) == ErrorCode::Empty);

    auto short_y = ok;
    short_y[0].y = testing::random_vector(2, rng);
    CHECK(code_of([&] { validate_dataset(short_y); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("stack_response concatenates task responses") {
    std::vector<Task> tasks(2);
    tasks[0].X = Eigen::MatrixXd::Ones(2, 1);
    tasks[0].y = Eigen::VectorXd{{1.0, 2.0}};
    tasks[1].X = Eigen::MatrixXd::Ones(1, 1);
    tasks[1].y = Eigen::VectorXd{{3.0}};
    const MultiTaskDataset ds(tasks);
    CHECK(stack_response(ds) == Eigen::VectorXd{{1.0, 2.0, 3.0}});

    const auto tiny = testing::tiny_two_task();
    CHECK(stack_response(tiny) == Eigen::VectorXd{{2.0, 1.0}});

    std::vector<Task> one{tasks[0]};
    CHECK(stack_response(MultiTaskDataset(one)) == tasks[0].y);
}

TEST_CASE("cached column norms and feature selection") {
    const auto ds = testing::random_dataset(3, 7, 6, 2);
    for (Index t = 0; t < 3; ++t) {
        for (Index l = 0; l < 6; ++l) {
            CHECK(ds.column_norms()(l, t) == doctest::Approx(ds.X(t).col(l).norm()).epsilon(1e-14));
            CHECK(ds.column_sq_norms()(l, t) == doctest::Approx(ds.X(t).col(l).squaredNorm()).epsilon(1e-14));
        }
    }
    const std::vector<Index> keep{4, 1};
    const auto sub = ds.select_features(keep);
    CHECK(sub.num_features() == 2);
    CHECK(sub.X(2).col(0) == ds.X(2).col(4));
    CHECK(sub.X(0).col(1) == ds.X(0).col(1));
    CHECK(sub.stacked_response() == ds.stacked_response());
}

TEST_CASE("dual point blocks reassemble the vector") {
    const auto ds = testing::random_dataset(4, 3, 2, 3);
    synth::Rng rng(4);
    const Eigen::VectorXd v = testing::random_vector(ds.total_samples(), rng);
    const DualPoint p(v, ds);
    Eigen::VectorXd back(ds.total_samples());
    for (Index t = 0; t < ds.num_tasks(); ++t) back.segment(ds.offset(t), ds.samples(t)) = p.block(t);
    CHECK(back == v);
    CHECK(p.compatible_with(ds));
}

TEST_CASE("lambda grid") {
    const auto g = LambdaGrid::log_spaced(5.0, 5, 0.01);
    const double expect[] = {1.0, 0.316227766016838, 0.1, 0.0316227766016838, 0.01};
    REQUIRE(g.size() == 5);
    CHECK(g[0] == 5.0);
    CHECK(g[4] == 5.0 * 0.01);
    for (std::size_t k = 0; k < 5; ++k) CHECK(g[k] / 5.0 == doctest::Approx(expect[k]).epsilon(1e-13));

    const auto h = LambdaGrid::log_spaced(3.0, 100, 0.01);
    for (std::size_t k = 2; k < h.size(); ++k) {
        CHECK(std::abs(h[k] / h[k - 1] - h[1] / h[0]) <= 1e-12);
    }
    CHECK_NOTHROW(h.check_starts_at(3.0));
    CHECK(code_of([&] { h.check_starts_at(3.1); }) == ErrorCode::InvalidGrid);
    CHECK(code_of([] { LambdaGrid({1.0, 1.0}); }) == ErrorCode::InvalidGrid);
    CHECK(code_of([] { LambdaGrid({1.0, -0.5}); }) == ErrorCode::InvalidGrid);
}

TEST_CASE("screening mask is strict in the score") {
    const auto m = ScreeningMask::from_scores(Eigen::VectorXd{{0.5, 1.0, 1.5, 0.999999999}}, 2.0);
    CHECK(m.inactive == std::vector<bool>{true, false, false, true});
    CHECK(m.count_inactive() == 2);
    CHECK(m.kept_features() == std::vector<Index>{1, 2});
}

TEST_CASE("json round trips are bit-identical") {
    synth::Rng rng(5);
    const WeightMatrix W{testing::random_matrix(4, 3, rng) * 1e-7};
    CHECK(nlohmann::json(W).get<WeightMatrix>() == W);

    const auto ds = testing::random_dataset(2, 3, 2, 6);
    const DualPoint p(testing::random_vector(ds.total_samples(), rng), ds);
    CHECK(nlohmann::json::parse(nlohmann::json(p).dump()).get<DualPoint>() == p);

    const auto g = LambdaGrid::log_spaced(7.3, 17, 0.003);
    const auto g2 = nlohmann::json::parse(nlohmann::json(g).dump()).get<LambdaGrid>();
    CHECK(std::equal(g.values().begin(), g.values().end(), g2.values().begin(), g2.values().end()));

    const auto m = ScreeningMask::from_scores(testing::random_vector(6, rng), 0.25);
    const auto m2 = nlohmann::json::parse(nlohmann::json(m).dump()).get<ScreeningMask>();
    CHECK(m2.inactive == m.inactive);
    CHECK(m2.scores == m.scores);
    CHECK(m2.lambda == m.lambda);
}

TEST_CASE("dataset and weight files round trip exactly") {
    const auto ds = testing::random_dataset(3, 4, 5, 7);
    const auto dir = scratch_dir("roundtrip");
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    REQUIRE(back.num_tasks() == 3);
    for (Index t = 0; t < 3; ++t) {
        CHECK(back.X(t) == ds.X(t));
        CHECK(back.y(t) == ds.y(t));
    }
    synth::Rng rng(8);
    const WeightMatrix W{testing::random_matrix(5, 3, rng)};
    save_weights_csv(W, dir / "w.csv");
    CHECK(load_weights_csv(dir / "w.csv") == W);
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted files raise parse errors with a location") {
    const auto ds = testing::random_dataset(2, 3, 2, 9);
    const auto dir = scratch_dir("corrupt");
    save_dataset(ds, dir);
    {
        std::ofstream f(dir / "task_1.csv", std::ios::app);
        f << "1.0,abc,2.0\n";
    }
    try {
        load_dataset(dir);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("task_1.csv") != std::string::npos);
    }
    std::filesystem::remove(dir / "meta.json");
    CHECK(code_of([&] { load_dataset(dir); }) != ErrorCode::Empty);
    std::filesystem::remove_all(dir);
}
