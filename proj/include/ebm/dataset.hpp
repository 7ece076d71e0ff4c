#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ebm/math.hpp"

namespace ebm {

/// Thrown on malformed dataset input. The message carries the line or byte offset.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    Vector features;
    std::size_t label = 0;
    bool synthetic = false;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;
    std::size_t dim = 0;

    std::size_t size() const noexcept { return samples.size(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    /// Throws DataError if any sample breaks the dim, label or [0, 1] invariants.
    void validate() const;

    std::vector<Vector> features_of_class(std::size_t label, bool include_synthetic = true) const;
};

/// Names "class_0" ... "class_{k-1}".
std::vector<std::string> default_class_names(std::size_t classes);

struct ClassDistribution {
    std::vector<std::size_t> counts;
    std::vector<std::size_t> synthetic_counts;
    std::size_t total = 0;
    std::size_t synthetic_total = 0;
    std::size_t majority = 0;  ///< lowest label among the largest classes
};

ClassDistribution distribution(const Dataset& ds);

/// Table-style text rendering of a distribution, one class per line.
std::string format_distribution(const Dataset& ds, const ClassDistribution& dist);

enum class DataFormat { csv, binary };
enum class FeatureEncoding : std::uint8_t { f64 = 0, u8 = 1 };

DataFormat parse_data_format(const std::string& name);
/// ".csv" → csv, anything else → binary.
DataFormat format_from_path(const std::string& path);

// CSV: one sample per row, label first, then `dim` feature values. A label
// written as "s:<label>" marks a synthetic sample. Lines starting with '#'
// are comments, except "#classes,<name0>,<name1>,..." which names the classes.
// Without that line classes are "class_0".."class_{max label}".
Dataset read_csv(std::istream& in);
void write_csv(std::ostream& out, const Dataset& ds);

// Binary container, little-endian:
//   "EBMD" | u8 version | u8 encoding (0 f64, 1 u8 pixel) | u16 reserved |
//   u32 dim | u32 count | u32 classes | per class: u32 length + name bytes |
//   labels u32[count] | synthetic flags u8[count] | features[count*dim]
// u8 features are scaled by 1/255 on load.
inline constexpr std::uint8_t kDatasetFormatVersion = 1;

Dataset read_binary(std::istream& in);
void write_binary(std::ostream& out, const Dataset& ds, FeatureEncoding encoding = FeatureEncoding::f64);

Dataset load_dataset(const std::string& path, DataFormat format);
void save_dataset(const std::string& path, const Dataset& ds, DataFormat format,
                  FeatureEncoding encoding = FeatureEncoding::f64);

/// Per-class seeded split of the real samples. Each class contributes
/// clamp(round(f * count), 1, count - 1) samples to train; synthetic samples
/// always go to train. Both halves keep the original sample order.
struct Split {
    Dataset train;
    Dataset test;
};

Split stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

}  // namespace ebm
