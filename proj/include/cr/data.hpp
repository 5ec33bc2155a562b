#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cr/matrix.hpp"

namespace cr {

enum class TargetKind { Classes, Ordinal, Regression };

struct Dataset {
    Matrix X;                 // N x D
    std::vector<int> labels;  // Classes: 0-based; Ordinal: 1..K
    Vector targets;           // Regression: scalar target per row
    TargetKind kind = TargetKind::Regression;
    int num_classes = 0;  // K for Classes/Ordinal

    // provenance
    std::string source;
    std::uint64_t seed = 0;

    std::size_t size() const { return X.rows(); }
    std::size_t dim() const { return X.cols(); }
    Vector row(std::size_t i) const;
    // Regression target, or the ordinal rating as a real (for mse training).
    double scalar_target(std::size_t i) const;
    void validate() const;
};

enum class FamilyKind { Smooth, Piecewise, Sparse, Oscillatory, Entangled };

FamilyKind family_from_string(const std::string& s);
std::string to_string(FamilyKind f);
inline const std::vector<FamilyKind> kAllFamilies = {
    FamilyKind::Smooth, FamilyKind::Piecewise, FamilyKind::Sparse, FamilyKind::Oscillatory,
    FamilyKind::Entangled};

struct SyntheticFamily {
    FamilyKind kind = FamilyKind::Smooth;
    std::size_t dim = 10;
    std::size_t n = 4096;
    std::uint64_t seed = 0;
    double freq_scale = -1.0;     // override of the w stddev; < 0 means family default
    double sparse_fraction = 0.2; // fraction of active dimensions (min 2)
    std::size_t entangler_width = 16;
    bool inner_product_reading = false;  // sum sin(<w,x>) instead of per-dimension
};

// X ~ Uniform[-1,1]^D, targets per family, standardized to zero mean / unit
// variance over the generated set. Pure function of the spec (incl. seed):
// sample i draws from substream (seed, i), family parameters from (seed, N).
Dataset gen_synthetic(const SyntheticFamily& spec);

// Indices of the contributing dimensions for a Sparse spec (ceil(frac*D), min 2).
std::vector<std::size_t> sparse_active_dims(const SyntheticFamily& spec);

// Standard big-endian IDX pair: magic 2051 images (N x 28 x 28 bytes, scaled
// to [0,1], flattened to D = 784), magic 2049 labels. Errors carry byte offsets.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit = 0);
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

// CSV with header `label,f0,...,f{D-1}`, label in 1..5 -> ordinal dataset.
Dataset load_embedding_csv(const std::string& path);

// Procedurally drawn 28x28 ten-class digit images in IDX layout, used as a
// desk-scale stand-in when the real IDX files are not on disk.
Dataset make_synthetic_digits(std::size_t n, std::uint64_t seed);

// Ordinal fixture: rating k in 1..K uniformly, features whose projection is
// k + N(0, noise); used by the ordinal pipeline tests.
Dataset make_ordinal_fixture(std::size_t n, int num_classes, double noise,
                             std::uint64_t seed, std::size_t dim = 8);

struct SplitResult {
    Dataset train, val, test;
};

// Seeded permutation + contiguous slicing; disjoint and exhaustive.
SplitResult split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                  std::uint64_t seed);

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace cr
