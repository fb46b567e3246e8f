#include "hotspots/eval/protocol.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hotspots/eval/metrics.h"

namespace hotspots::eval {

using nlohmann::json;

json MetricsReport::AggregateJson() const {
  return json{{"method", method},         {"split", split},
              {"count", count()},         {"kld", mean_kld},
              {"sim", mean_sim},          {"auc_j", mean_auc_j},
              {"uniform_fallbacks", uniform_fallbacks}};
}

std::string MetricsReport::RowsCsv(const data::Vocab& actions) const {
  std::ostringstream os;
  os << "image_id,action,kld,sim,auc_j\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", r.kld, r.sim, r.auc_j);
    os << r.image_id << ',' << actions.Label(r.action) << buf;
  }
  return os.str();
}

void MetricsReport::Write(const std::filesystem::path& dir, const data::Vocab& actions) const {
  std::filesystem::create_directories(dir);
  const std::string stem = method + "_" + split;
  std::ofstream(dir / (stem + ".csv")) << RowsCsv(actions);
  std::ofstream(dir / (stem + ".json")) << AggregateJson().dump(2) << "\n";
}

MetricsReport Evaluate(const std::string& method_id, const std::string& split_id,
                       const std::vector<EvalImage>& images, const HeatmapMethod& method) {
  // Group ground truth by (image id, action) so each pair counts once.
  std::map<std::pair<std::string, int>, std::vector<data::Heatmap>> targets;
  std::map<std::string, const EvalImage*> by_id;
  for (const auto& img : images) {
    by_id.emplace(img.id, &img);
    for (const auto& [a, gt] : img.gt) targets[{img.id, a}].push_back({gt, false});
  }
  if (targets.empty()) throw MetricError("evaluation has no (image, action) pairs with ground truth");

  MetricsReport report;
  report.method = method_id;
  report.split = split_id;
  for (const auto& [key, maps] : targets) {
    const Tensor gt = data::UnionHeatmaps(maps).map;
    Tensor pred = method(*by_id.at(key.first), key.second);
    MetricsRow row{key.first, key.second};
    if (pred.shape() != gt.shape())
      throw MetricError("method " + method_id + " returned " + ShapeToString(pred.shape()) +
                        " for " + key.first + ", ground truth is " + ShapeToString(gt.shape()));
    if (pred.Sum() <= 0) {
      pred.Fill(1.0);
      row.uniform_fallback = true;
      ++report.uniform_fallbacks;
    }
    row.kld = Kld(pred, gt);
    row.sim = Sim(pred, gt);
    row.auc_j = AucJ(pred, gt);
    report.rows.push_back(row);
  }
  for (const auto& r : report.rows) {
    report.mean_kld += r.kld;
    report.mean_sim += r.sim;
    report.mean_auc_j += r.auc_j;
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean_kld /= n;
  report.mean_sim /= n;
  report.mean_auc_j /= n;
  return report;
}

std::vector<EvalImage> LoadEvalImages(const data::Dataset& dataset,
                                      const std::vector<std::string>& ids,
                                      const std::optional<std::filesystem::path>& gt_sidecar) {
  std::map<std::string, std::vector<data::GtSidecarEntry>> sidecar;
  if (gt_sidecar)
    for (auto& e : data::LoadGtSidecar(*gt_sidecar)) sidecar[e.id].push_back(e);
  // Instances sharing an inactive image are one evaluation image.
  std::map<std::filesystem::path, std::size_t> by_path;
  std::vector<EvalImage> out;
  for (const auto& id : ids) {
    const auto& r = dataset.Find(id);
    auto [it, fresh] = by_path.emplace(r.inactive_image, out.size());
    if (fresh) {
      EvalImage img;
      img.id = r.id;
      img.image = LoadRgb(r.inactive_image);
      img.object = r.object;
      out.push_back(std::move(img));
    }
    EvalImage& img = out[it->second];
    if (auto s = sidecar.find(id); s != sidecar.end()) {
      for (const auto& e : s->second) {
        Tensor gt = data::LoadGtHeatmap(e.heatmap).map;
        if (gt.dim(0) != img.image.height || gt.dim(1) != img.image.width)
          throw data::LoadError("instance " + id + ": ground-truth heatmap size differs from image");
        img.gt.emplace_back(dataset.actions.IndexOf(e.action), std::move(gt));
      }
    } else if (r.annotation) {
      img.gt.emplace_back(r.annotation->action,
                          data::KeypointsToHeatmap(*r.annotation,
                                                   data::DefaultKeypointSigma(img.image.height,
                                                                              img.image.width))
                              .map);
    }
  }
  return out;
}

}  // namespace hotspots::eval
