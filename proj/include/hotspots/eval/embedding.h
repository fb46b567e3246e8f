#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hotspots/training/model.h"

namespace hotspots::eval {

enum class Space { kInactive, kActive };
Space ParseSpace(const std::string& name);

// Mean pooled embedding per object class: P(x_I) for the inactive space and
// P(F_ant(x_I)) for the active space. Classes without images are left out.
struct EmbeddingTable {
  std::vector<int> classes;  // object indices, ascending
  std::vector<std::string> labels;
  std::vector<std::vector<double>> inactive;
  std::vector<std::vector<double>> active;
  std::vector<std::string> warnings;

  const std::vector<std::vector<double>>& vectors(Space s) const {
    return s == Space::kInactive ? inactive : active;
  }
  int size() const { return static_cast<int>(classes.size()); }
  // Row position of an object index; throws when absent.
  int RowOf(int object) const;
};

struct LabeledImage {
  int object = 0;
  const RgbImage* image = nullptr;
};

EmbeddingTable BuildEmbeddingTable(training::Model& model, const std::vector<LabeledImage>& images);

struct Neighbor {
  int object = 0;
  double distance = 0;
};

// k nearest other classes by Euclidean distance (ties by object index).
std::vector<Neighbor> NearestNeighbors(const EmbeddingTable& table, int object, Space space, int k);

struct Merge {
  int left = 0, right = 0;  // cluster ids: < n are leaves, n + i is merge i
  double distance = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;  // n - 1 merges in order

  // Nested lists of leaf labels, e.g. [["a","b"],["c","d"]].
  nlohmann::json NestedJson() const;
};

// Average-linkage agglomerative clustering; among equally distant pairs the
// one with the smallest (min leaf index, min leaf index) wins.
Dendrogram Cluster(const std::vector<std::vector<double>>& points,
                   const std::vector<std::string>& labels);
Dendrogram ClusterObjects(const EmbeddingTable& table, Space space);

}  // namespace hotspots::eval
