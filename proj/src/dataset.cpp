#include "hse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hse/error.hpp"

namespace hse {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == ',' && !quoted) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    out.push_back(trim(line.substr(start)));
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string stem_of(const std::string& path) {
    auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.rfind('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace

void Dataset::validate() const {
    if (features.rows() < 1) throw ValidationError("dataset has no points");
    if (features.cols() < 1) throw ValidationError("dataset has no feature columns");
    if (!features.allFinite()) throw ValidationError("non-finite feature value");
    if (class_count < 2) throw ValidationError("class count must be at least 2");
    if (labels) {
        if (labels->size() != size()) throw ValidationError("label count does not match point count");
        for (std::size_t i = 0; i < labels->size(); ++i) {
            ClassId c = (*labels)[i];
            if (c < 0 || c >= class_count)
                throw ValidationError("label " + std::to_string(c) + " of point " + std::to_string(i) +
                                      " outside [0," + std::to_string(class_count) + ")");
        }
    }
    if (assets && assets->size() != size()) throw ValidationError("asset count does not match point count");
}

Dataset parse_csv(std::string_view text, const CsvOptions& options, std::string name) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            auto nl = text.find('\n', start);
            if (nl == std::string_view::npos) nl = text.size();
            lines.push_back(text.substr(start, nl - start));
            start = nl + 1;
        }
    }
    // Skip a leading UTF-8 byte-order mark.
    if (!lines.empty() && lines[0].starts_with("\xEF\xBB\xBF")) lines[0].remove_prefix(3);
    if (lines.empty() || trim(lines[0]).empty()) throw ParseError("missing header", 1);

    const auto header = split_row(lines[0]);
    const std::size_t arity = header.size();
    int label_col = -1, asset_col = -1;
    for (std::size_t c = 0; c < arity; ++c) {
        if (header[c] == options.label_column) label_col = static_cast<int>(c);
        if (header[c] == options.asset_column) asset_col = static_cast<int>(c);
    }
    if (label_col < 0 && options.label_column_required)
        throw ParseError("label column '" + options.label_column + "' not in header", 1);

    // Columns are classified as numeric features or skipped text columns by
    // the first data row; later rows must follow the same schema.
    std::vector<int> feature_cols;
    bool schema_known = false;

    std::vector<std::vector<double>> rows;
    std::vector<ClassId> labels;
    std::vector<std::string> assets;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row_no = li + 1;
        if (trim(lines[li]).empty()) continue;
        const auto fields = split_row(lines[li]);
        if (fields.size() != arity)
            throw ParseError("expected " + std::to_string(arity) + " fields, found " + std::to_string(fields.size()),
                             row_no);
        if (!schema_known) {
            for (std::size_t c = 0; c < arity; ++c) {
                if (static_cast<int>(c) == label_col || static_cast<int>(c) == asset_col) continue;
                if (parse_double(fields[c])) feature_cols.push_back(static_cast<int>(c));
            }
            if (feature_cols.empty()) throw ParseError("no numeric feature columns", row_no);
            schema_known = true;
        }
        std::vector<double> row;
        row.reserve(feature_cols.size());
        for (int c : feature_cols) {
            auto v = parse_double(fields[c]);
            if (!v) throw ParseError("non-numeric value '" + std::string(fields[c]) + "' in column '" +
                                         std::string(header[c]) + "'", row_no);
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
        if (label_col >= 0) {
            auto v = parse_int(fields[label_col]);
            if (!v) throw ParseError("non-integer label '" + std::string(fields[label_col]) + "'", row_no);
            if (*v < 0) throw ValidationError("negative label at row " + std::to_string(row_no));
            labels.push_back(static_cast<ClassId>(*v));
        }
        if (asset_col >= 0) assets.emplace_back(fields[asset_col]);
    }
    if (rows.empty()) throw ParseError("no data rows", 2);

    Dataset ds;
    ds.name = std::move(name);
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < feature_cols.size(); ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (label_col >= 0) {
        const int max_label = *std::max_element(labels.begin(), labels.end());
        ds.class_count = options.class_count.value_or(std::max(2, max_label + 1));
        ds.labels = std::move(labels);
    } else {
        ds.class_count = options.class_count.value_or(2);
    }
    if (asset_col >= 0) ds.assets = std::move(assets);
    ds.validate();
    return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    return parse_csv(read_file(path), options, stem_of(path));
}

std::string to_csv(const Dataset& dataset) {
    std::ostringstream out;
    for (std::size_t j = 0; j < dataset.dims(); ++j) out << (j ? "," : "") << 'f' << j;
    if (dataset.labels) out << ",label";
    if (dataset.assets) out << ",asset";
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t j = 0; j < dataset.dims(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf,
                                           dataset.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                           std::chars_format::general, 17);
            if (j) out << ',';
            out.write(buf, ptr - buf);
        }
        if (dataset.labels) out << ',' << (*dataset.labels)[i];
        if (dataset.assets) out << ',' << (*dataset.assets)[i];
        out << '\n';
    }
    return out.str();
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << to_csv(dataset);
}

void apply_sidecar(Dataset& dataset, const std::string& json_text) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sidecar: ") + e.what(), 1);
    }
    if (meta.contains("name")) dataset.name = meta.at("name").get<std::string>();
    if (meta.contains("class_names")) {
        dataset.class_names = meta.at("class_names").get<std::vector<std::string>>();
        if (static_cast<int>(dataset.class_names.size()) < dataset.class_count)
            throw ValidationError("sidecar lists fewer class names than classes present");
        dataset.class_count = static_cast<int>(dataset.class_names.size());
    }
    dataset.validate();
}

void load_sidecar(Dataset& dataset, const std::string& path) { apply_sidecar(dataset, read_file(path)); }

Partition split_state(std::size_t n, std::span<const PointId> labeled) {
    std::vector<char> mark(n, 0);
    for (PointId p : labeled) {
        if (p < 0 || static_cast<std::size_t>(p) >= n)
            throw ValidationError("point id " + std::to_string(p) + " out of range");
        mark[static_cast<std::size_t>(p)] = 1;
    }
    Partition part;
    for (std::size_t i = 0; i < n; ++i)
        (mark[i] ? part.labeled : part.unlabeled).push_back(static_cast<PointId>(i));
    return part;
}

Dataset make_gaussian_blobs(const BlobSpec& blobs) {
    if (blobs.sizes.size() < 2) throw ConfigError("need at least two blobs");
    if (blobs.dims < 2) throw ConfigError("blobs need at least two dimensions");
    const std::size_t classes = blobs.sizes.size();
    std::size_t n = 0;
    for (auto s : blobs.sizes) n += s;

    // Centres on a circle in the first two dimensions, adjacent centres
    // `separation` apart.
    const double radius = blobs.separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
    std::mt19937_64 rng(blobs.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset ds;
    ds.name = "blobs";
    ds.class_count = static_cast<int>(classes);
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(blobs.dims));
    std::vector<ClassId> labels;
    labels.reserve(n);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
        for (std::size_t m = 0; m < blobs.sizes[c]; ++m, ++row) {
            for (std::size_t d = 0; d < blobs.dims; ++d) {
                double centre = d == 0 ? radius * std::cos(angle) : d == 1 ? radius * std::sin(angle) : 0.0;
                ds.features(row, static_cast<Eigen::Index>(d)) = centre + noise(rng);
            }
            labels.push_back(static_cast<ClassId>(c));
        }
    }
    ds.labels = std::move(labels);
    ds.validate();
    return ds;
}

}  // namespace hse
