#include "hotspots/eval/embedding.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace hotspots::eval {

Space ParseSpace(const std::string& name) {
  if (name == "inactive") return Space::kInactive;
  if (name == "active") return Space::kActive;
  throw std::invalid_argument("embedding space must be 'inactive' or 'active', got '" + name + "'");
}

int EmbeddingTable::RowOf(int object) const {
  const auto it = std::find(classes.begin(), classes.end(), object);
  if (it == classes.end())
    throw std::out_of_range("object " + std::to_string(object) + " has no embedding");
  return static_cast<int>(it - classes.begin());
}

EmbeddingTable BuildEmbeddingTable(training::Model& model, const std::vector<LabeledImage>& images) {
  ag::NoGradGuard no_grad;
  const int num_objects = model.objects().size();
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> sums;
  std::map<int, int> counts;
  for (const auto& li : images) {
    if (li.object < 0 || li.object >= num_objects)
      throw std::out_of_range("embedding image has an unknown object index");
    const Tensor input = ImageToTensor(CenterCropResize(*li.image, model.input_size()));
    const ag::Var x = model.Encode(input, false);
    const ag::Var inactive = model.Pool(x);
    const ag::Var active = model.Pool(model.Anticipate(x, false));
    auto& [si, sa] = sums[li.object];
    if (si.empty()) {
      si.assign(inactive.value().size(), 0.0);
      sa.assign(active.value().size(), 0.0);
    }
    for (std::size_t i = 0; i < si.size(); ++i) {
      si[i] += inactive.value()[i];
      sa[i] += active.value()[i];
    }
    ++counts[li.object];
  }
  EmbeddingTable t;
  for (int o = 0; o < num_objects; ++o) {
    if (!counts.count(o)) {
      t.warnings.push_back("object class '" + model.objects().Label(o) +
                           "' has no images and is excluded");
      continue;
    }
    auto [si, sa] = sums[o];
    for (auto& v : si) v /= counts[o];
    for (auto& v : sa) v /= counts[o];
    t.classes.push_back(o);
    t.labels.push_back(model.objects().Label(o));
    t.inactive.push_back(std::move(si));
    t.active.push_back(std::move(sa));
  }
  return t;
}

namespace {

double Distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<Neighbor> NearestNeighbors(const EmbeddingTable& table, int object, Space space,
                                       int k) {
  const auto& v = table.vectors(space);
  const int row = table.RowOf(object);
  std::vector<Neighbor> out;
  for (int i = 0; i < table.size(); ++i)
    if (i != row) out.push_back({table.classes[i], Distance(v[row], v[i])});
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.object < b.object;
  });
  if (k >= 0 && static_cast<std::size_t>(k) < out.size()) out.resize(k);
  return out;
}

Dendrogram Cluster(const std::vector<std::vector<double>>& points,
                   const std::vector<std::string>& labels) {
  const int n = static_cast<int>(points.size());
  if (n < 2) throw std::invalid_argument("clustering needs at least two classes");
  if (labels.size() != points.size()) throw std::invalid_argument("one label per point");
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i][j] = Distance(points[i], points[j]);

  struct Active {
    int id;
    int min_leaf;
    std::vector<int> members;
  };
  std::vector<Active> clusters;
  for (int i = 0; i < n; ++i) clusters.push_back({i, i, {i}});
  auto linkage = [&](const Active& a, const Active& b) {
    double s = 0;
    for (int i : a.members)
      for (int j : b.members) s += d[i][j];
    return s / (static_cast<double>(a.members.size()) * b.members.size());
  };

  Dendrogram out;
  out.leaves = labels;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 1;
    std::pair<int, int> best_key{n, n};
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double l = linkage(clusters[i], clusters[j]);
        std::pair<int, int> key{std::min(clusters[i].min_leaf, clusters[j].min_leaf),
                                std::max(clusters[i].min_leaf, clusters[j].min_leaf)};
        if (l < best || (l == best && key < best_key)) {
          best = l;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    Active merged{n + static_cast<int>(out.merges.size()),
                  std::min(clusters[bi].min_leaf, clusters[bj].min_leaf),
                  clusters[bi].members};
    merged.members.insert(merged.members.end(), clusters[bj].members.begin(),
                          clusters[bj].members.end());
    out.merges.push_back({clusters[bi].id, clusters[bj].id, best});
    clusters.erase(clusters.begin() + bj);
    clusters[bi] = std::move(merged);
  }
  return out;
}

nlohmann::json Dendrogram::NestedJson() const {
  const int n = static_cast<int>(leaves.size());
  std::vector<nlohmann::json> nodes;
  for (const auto& l : leaves) nodes.emplace_back(l);
  for (const auto& m : merges) nodes.push_back(nlohmann::json::array({nodes[m.left], nodes[m.right]}));
  return n == 0 ? nlohmann::json::array() : nodes.back();
}

Dendrogram ClusterObjects(const EmbeddingTable& table, Space space) {
  return Cluster(table.vectors(space), table.labels);
}

}  // namespace hotspots::eval
