#pragma once

// On-disk dataset directories:
//
//   meta.json     {"name", "num_nodes", "num_features", "num_classes",
//                  "feature_dtype": "f64le"}
//   edges.tsv     "i<TAB>j" per line, 0-based, either orientation
//   features.bin  num_nodes × num_features float64, little-endian, row-major
//   labels.tsv    one integer per line, -1 for unlabeled
//   splits.json   {"train": [...], "val": [...], "test": [...]}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gcn/tensor.hpp"

namespace gcn {

inline constexpr int kUnlabeled = -1;

struct GraphDataset {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  DenseMatrix features;
  SparseMatrix adjacency;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool operator==(const GraphDataset&) const = default;
};

/// Throws ValidationError on any broken invariant: shapes, label range,
/// overlapping or unlabeled splits, asymmetric adjacency.
void validate_dataset(const GraphDataset& dataset);

GraphDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const GraphDataset& dataset, const std::filesystem::path& dir);

struct SbmParams {
  std::size_t nodes_per_block = 50;
  std::size_t blocks = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  double feature_noise = 0.5;
  std::uint64_t seed = 0;
};

/// Planted-partition graph with one-hot block features plus Gaussian noise
/// and a seeded 10% / 20% / 70% train/val/test split inside every block.
GraphDataset generate_sbm(const SbmParams& params);

/// Scales every row to unit L1 norm; all-zero rows are left as they are.
DenseMatrix row_normalize(const DenseMatrix& features);

}  // namespace gcn
