#ifndef FASTICARL_DATA_IO_HPP
#define FASTICARL_DATA_IO_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fasticarl/tensor.hpp"

namespace fasticarl {

/// Raised on malformed dataset files; messages name the offending field and,
/// for truncation, the number of missing bytes.
class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

/// A full dataset of raw model inputs. features is n x d row-major, labels are
/// class ids below class_count.
struct LabeledDataset {
    Tensor2 features;
    std::vector<std::uint16_t> labels;
    std::uint16_t class_count = 0;
    std::string name;

    std::size_t size() const { return features.rows; }
    std::vector<std::size_t> indices_of_class(std::uint16_t c) const;
    std::size_t class_size(std::uint16_t c) const;
};

struct SplitSpec {
    double test_fraction = 0.10;
    std::uint32_t seed = 0;
};

/// FDSF: magic "FDSF", u16 version, u32 n, u32 d, u32 N, n*d f32 row-major,
/// n u16 labels. All little-endian.
void save_dataset(const LabeledDataset& dataset, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

/// N isotropic unit-variance Gaussian clusters whose means sit at mutual
/// distance >= separation (means are drawn inside a box whose side scales with
/// separation, so separation 0 collapses all clusters onto one point).
/// Deterministic per seed.
LabeledDataset generate_blobs(std::uint16_t classes, std::size_t per_class, std::size_t dims,
                              double separation, std::uint32_t seed);

/// Stratified split: per class, test count = max(1, round(fraction * size)),
/// capped so at least one training sample survives. Deterministic per seed.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                const SplitSpec& spec);

} // namespace fasticarl

#endif
