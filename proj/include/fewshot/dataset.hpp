#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fewshot/image.hpp"

namespace fewshot {

enum class Split { train, validation, test };

inline constexpr Split all_splits[] = {Split::train, Split::validation, Split::test};

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Per-class image counts for each split.
struct SplitSpec {
    int train = 20;
    int validation = 20;
    int test = 400;

    int count(Split s) const;
    int total() const { return train + validation + test; }
    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct ImageSample {
    Image image;
    int class_id = 0;
    Split split = Split::train;
    std::string source_id;
};

/// Immutable labelled image collection partitioned into train/validation/test.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> classes, std::vector<ImageSample> samples, SplitSpec spec);

    const std::vector<std::string>& classes() const { return classes_; }
    int class_count() const { return static_cast<int>(classes_.size()); }
    std::span<const ImageSample> samples() const { return samples_; }
    const ImageSample& sample(std::size_t i) const { return samples_[i]; }
    std::size_t size() const { return samples_.size(); }
    const SplitSpec& split_spec() const { return spec_; }

    /// Sample indices of one split grouped by class_id, in storage order.
    const std::vector<std::vector<std::size_t>>& by_class(Split s) const {
        return by_class_[static_cast<int>(s)];
    }
    /// All sample indices of one split, in storage order.
    std::vector<std::size_t> indices(Split s) const;
    std::size_t count(Split s) const;

private:
    std::vector<std::string> classes_;
    std::vector<ImageSample> samples_;
    SplitSpec spec_;
    std::vector<std::vector<std::size_t>> by_class_[3];
};

enum class Difficulty { easy, hard };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view s);

struct SyntheticOptions {
    int width = 64;
    int height = 80;
};

/// Renders a flame-like blob per class. `hard` makes the pairs returned by
/// confusable_pairs() nearly indistinguishable and raises per-image jitter.
Dataset generate_synthetic_dataset(int n_classes, const SplitSpec& spec, Difficulty difficulty,
                                   std::uint64_t seed, const SyntheticOptions& opts = {});

/// Class pairs that overlap in the hard synthetic mode.
std::vector<std::pair<int, int>> confusable_pairs(int n_classes);

/// Reads `<root>/<class>/*.{png,jpg,jpeg,bmp}` and draws a random disjoint
/// split per class. Classes are ordered lexicographically.
Dataset load_dataset(const std::filesystem::path& root, const SplitSpec& spec, std::uint64_t seed);

/// Same, but fails with StructuralError if any of `expected_classes` has no directory.
Dataset load_dataset(const std::filesystem::path& root, const SplitSpec& spec, std::uint64_t seed,
                     std::span<const std::string> expected_classes);

struct ManifestInfo {
    std::string origin;  // "synthetic:easy", "directory:<path>", ...
    std::uint64_t seed = 0;
};

/// Writes every sample as `<root>/<class>/<id>.png` plus `<root>/manifest.json`.
void export_dataset(const Dataset& ds, const std::filesystem::path& root, const ManifestInfo& info,
                    bool overwrite);

/// Reads a directory written by export_dataset, keeping the recorded splits.
Dataset load_prepared_dataset(const std::filesystem::path& root);

bool has_manifest(const std::filesystem::path& root);

} // namespace fewshot
