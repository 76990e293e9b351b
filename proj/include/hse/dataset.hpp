#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hse {

using PointId = std::int32_t;
using ClassId = std::int32_t;

// Row-major so that one datapoint is one contiguous feature vector.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Pool of N datapoints with Q features each. Immutable once constructed.
struct Dataset {
    FeatureMatrix features;
    std::optional<std::vector<ClassId>> labels;
    int class_count = 2;
    std::optional<std::vector<std::string>> assets;
    std::vector<std::string> class_names;  // empty unless a sidecar provided them
    std::string name;

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
    bool has_labels() const { return labels.has_value(); }

    // Throws ValidationError when an invariant does not hold.
    void validate() const;
};

struct CsvOptions {
    // Column holding integer class ids. When the column is absent from the
    // header the dataset is unlabeled, unless the name was set explicitly.
    std::string label_column = "label";
    bool label_column_required = false;
    std::string asset_column = "asset";
    // Forces C instead of 1 + max(label).
    std::optional<int> class_count;
};

Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {},
                  std::string name = "inline");

// Writes features with 17 significant digits so that parse_csv(write) is exact.
std::string to_csv(const Dataset& dataset);
void write_csv(const Dataset& dataset, const std::string& path);

// Applies {"class_names": [...], "name": "..."}; class_names may raise C.
void apply_sidecar(Dataset& dataset, const std::string& json_text);
void load_sidecar(Dataset& dataset, const std::string& path);

struct Partition {
    std::vector<PointId> labeled;
    std::vector<PointId> unlabeled;
};

Partition split_state(std::size_t n, std::span<const PointId> labeled);
inline Partition split_state(const Dataset& dataset, std::span<const PointId> labeled) {
    return split_state(dataset.size(), labeled);
}

// Isotropic Gaussian blobs, used by the benchmarks and tests. Cluster c has
// sizes[c] points centred on a regular simplex-like layout scaled by
// `separation`, with unit per-dimension standard deviation.
struct BlobSpec {
    std::vector<std::size_t> sizes;
    std::size_t dims = 2;
    double separation = 6.0;
    std::uint64_t seed = 0;
};

Dataset make_gaussian_blobs(const BlobSpec& blobs);

}  // namespace hse
