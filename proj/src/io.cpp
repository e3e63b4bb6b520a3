#include "mtfl/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace mtfl {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& file, std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << file.string();
    if (line > 0) os << ":" << line;
    os << ": " << msg;
    throw Error(ErrorCode::ParseError, os.str());
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<double> parse_row(std::string_view line, const std::filesystem::path& file, std::size_t lineno) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        std::string_view field = trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!field.empty() && field.front() == '+') field.remove_prefix(1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
            parse_fail(file, lineno, "field " + std::to_string(out.size()) + " is not a number: '" + std::string(field) + "'");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + file.string());
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        rows.push_back(parse_row(line, file, lineno));
    }
    return rows;
}

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + file.string());
    }
    return out;
}

}  // namespace

std::string format_exact(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

MultiTaskDataset load_dataset(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw Error(ErrorCode::IoError, "cannot open " + meta_path.string());
    }
    nlohmann::json meta;
    Index T = 0;
    Index d = 0;
    std::vector<Index> n;
    try {
        meta_in >> meta;
        T = meta.at("T").get<Index>();
        d = meta.at("d").get<Index>();
        n = meta.at("n").get<std::vector<Index>>();
    } catch (const nlohmann::json::exception& e) {
        parse_fail(meta_path, 0, e.what());
    }
    if (T < 1 || d < 1) {
        throw Error(ErrorCode::Empty, "meta.json declares T=" + std::to_string(T) + ", d=" + std::to_string(d));
    }
    if (static_cast<Index>(n.size()) != T) {
        parse_fail(meta_path, 0, "\"n\" has " + std::to_string(n.size()) + " entries, T is " + std::to_string(T));
    }

    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
        const auto file = dir / ("task_" + std::to_string(t) + ".csv");
        const auto rows = read_csv(file);
        if (static_cast<Index>(rows.size()) != n[t]) {
            parse_fail(file, 0, "expected " + std::to_string(n[t]) + " rows, found " + std::to_string(rows.size()));
        }
        Task task;
        task.X.resize(n[t], d);
        task.y.resize(n[t]);
        for (Index i = 0; i < n[t]; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (static_cast<Index>(row.size()) != d + 1) {
                parse_fail(file, static_cast<std::size_t>(i + 1),
                           "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(row.size()));
            }
            for (Index j = 0; j < d; ++j) task.X(i, j) = row[static_cast<std::size_t>(j)];
            task.y[i] = row.back();
        }
        tasks.push_back(std::move(task));
    }
    return MultiTaskDataset(std::move(tasks));
}

void save_dataset(const MultiTaskDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["T"] = ds.num_tasks();
    meta["d"] = ds.num_features();
    std::vector<Index> n;
    for (Index t = 0; t < ds.num_tasks(); ++t) n.push_back(ds.samples(t));
    meta["n"] = n;
    open_out(dir / "meta.json") << meta.dump(2) << "\n";

    for (Index t = 0; t < ds.num_tasks(); ++t) {
        auto out = open_out(dir / ("task_" + std::to_string(t) + ".csv"));
        const auto& X = ds.X(t);
        const auto& y = ds.y(t);
        std::string line;
        for (Index i = 0; i < X.rows(); ++i) {
            line.clear();
            for (Index j = 0; j < X.cols(); ++j) {
                line += format_exact(X(i, j));
                line += ',';
            }
            line += format_exact(y[i]);
            line += '\n';
            out << line;
        }
    }
}

void save_weights_csv(const WeightMatrix& W, const std::filesystem::path& file) {
    auto out = open_out(file);
    for (Index l = 0; l < W.rows(); ++l) {
        for (Index t = 0; t < W.cols(); ++t) {
            if (t > 0) out << ',';
            out << format_exact(W.values(l, t));
        }
        out << '\n';
    }
}

WeightMatrix load_weights_csv(const std::filesystem::path& file) {
    const auto rows = read_csv(file);
    if (rows.empty()) {
        throw Error(ErrorCode::Empty, file.string() + " has no rows");
    }
    const auto T = static_cast<Index>(rows.front().size());
    WeightMatrix W{Eigen::MatrixXd(static_cast<Index>(rows.size()), T)};
    for (std::size_t l = 0; l < rows.size(); ++l) {
        if (static_cast<Index>(rows[l].size()) != T) {
            parse_fail(file, l + 1, "ragged row");
        }
        for (Index t = 0; t < T; ++t) W.values(static_cast<Index>(l), t) = rows[l][static_cast<std::size_t>(t)];
    }
    return W;
}

}  // namespace mtfl

namespace nlohmann {

void adl_serializer<mtfl::WeightMatrix>::to_json(json& j, const mtfl::WeightMatrix& W) {
    j = json::object();
    j["rows"] = W.rows();
    j["cols"] = W.cols();
    std::vector<double> data(W.values.data(), W.values.data() + W.values.size());
    j["colmajor"] = data;
}

mtfl::WeightMatrix adl_serializer<mtfl::WeightMatrix>::from_json(const json& j) {
    const auto rows = j.at("rows").get<mtfl::Index>();
    const auto cols = j.at("cols").get<mtfl::Index>();
    const auto data = j.at("colmajor").get<std::vector<double>>();
    if (static_cast<mtfl::Index>(data.size()) != rows * cols) {
        throw mtfl::Error(mtfl::ErrorCode::DimensionMismatch, "weight matrix payload size");
    }
    return mtfl::WeightMatrix{Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols)};
}

void adl_serializer<mtfl::DualPoint>::to_json(json& j, const mtfl::DualPoint& p) {
    j = json::object();
    j["offsets"] = std::vector<mtfl::Index>(p.offsets().begin(), p.offsets().end());
    j["values"] = std::vector<double>(p.values().data(), p.values().data() + p.values().size());
}

mtfl::DualPoint adl_serializer<mtfl::DualPoint>::from_json(const json& j) {
    const auto values = j.at("values").get<std::vector<double>>();
    return mtfl::DualPoint(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<mtfl::Index>(values.size())),
                           j.at("offsets").get<std::vector<mtfl::Index>>());
}

void adl_serializer<mtfl::LambdaGrid>::to_json(json& j, const mtfl::LambdaGrid& g) {
    j = std::vector<double>(g.values().begin(), g.values().end());
}

mtfl::LambdaGrid adl_serializer<mtfl::LambdaGrid>::from_json(const json& j) {
    return mtfl::LambdaGrid(j.get<std::vector<double>>());
}

void adl_serializer<mtfl::ScreeningMask>::to_json(json& j, const mtfl::ScreeningMask& m) {
    j = json::object();
    j["lambda"] = m.lambda;
    j["scores"] = std::vector<double>(m.scores.data(), m.scores.data() + m.scores.size());
    j["inactive"] = std::vector<bool>(m.inactive.begin(), m.inactive.end());
}

mtfl::ScreeningMask adl_serializer<mtfl::ScreeningMask>::from_json(const json& j) {
    const auto scores = j.at("scores").get<std::vector<double>>();
    auto m = mtfl::ScreeningMask::from_scores(
        Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<mtfl::Index>(scores.size())),
        j.at("lambda").get<double>());
    if (j.at("inactive").get<std::vector<bool>>() != m.inactive) {
        throw mtfl::Error(mtfl::ErrorCode::ParseError, "screening mask flags disagree with its scores");
    }
    return m;
}

}  // namespace nlohmann
