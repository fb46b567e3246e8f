#include "hotspots/docs/doc_lint.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "hotspots/training/config.h"

namespace hotspots::docs {

const std::vector<Anchor>& RequiredAnchors() {
  static const std::vector<Anchor> anchors = {
      {"video-action-classifier", "per-frame encoder, recurrent aggregation, action classifier"},
      {"classification-loss", "cross-entropy on the final aggregated state"},
      {"anticipation-module", "inactive-to-active feature transform"},
      {"active-frame-selection", "prefix with the lowest classification loss"},
      {"feature-matching-loss", "L2 distance between anticipated and active pooled features"},
      {"auxiliary-loss", "classification of the anticipated inactive feature"},
      {"hotspot-activation-map", "sum over channels of ReLU(gradient * activation)"},
      {"l2-pooling", "per-channel root-mean-square spatial pooling"},
      {"dilated-resolution", "stride removed and dilation added in the last stages"},
      {"combined-loss", "weighted sum of the three losses"},
      {"gradients-through-anticipation", "inference path through the anticipation network"},
      {"per-frame-video-hotspots", "hotspots for every frame of a video"},
      {"metric-kld", "KL divergence"},
      {"metric-sim", "histogram intersection"},
      {"metric-auc-j", "Judd AUC on binarized ground truth"},
      {"center-bias-baseline", "fixed centred Gaussian"},
      {"gradcam-baseline", "Grad-CAM on a plain action recognizer"},
      {"novel-object-split", "familiar/unfamiliar object protocol"},
      {"functional-similarity-embedding", "inactive vs active embedding spaces"},
      {"gradient-path-ablation", "hotspots taken at the anticipated features"},
      {"keypoint-heatmaps", "Gaussian ground truth from annotated points"},
      {"triplet-anticipation-loss", "margin loss with a negative object image"},
      {"training-hyperparameters", "architecture and optimizer settings"},
      {"img2heatmap-baseline", "strongly supervised encoder-decoder"},
      {"gt-union-protocol", "union of ground-truth maps and 0.5 binarization"},
      {"object-clustering", "agglomerative clustering of mean object embeddings"},
  };
  return anchors;
}

std::string LintReport::Text() const {
  std::ostringstream os;
  os << "doc_lint: " << (pass ? "PASS" : "FAIL") << " (" << mapped_anchors << "/"
     << RequiredAnchors().size() << " anchors mapped, " << documented_keys << "/"
     << training::TrainConfig::FieldNames().size() << " config keys documented)\n";
  for (const auto& p : problems) os << "  - " << p << "\n";
  return os.str();
}

std::vector<std::string> TableKeys(const std::string& markdown) {
  std::vector<std::string> keys;
  std::istringstream in(markdown);
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] != '|') continue;
    const auto cell_end = line.find('|', start + 1);
    const std::string cell = line.substr(start + 1, cell_end - start - 1);
    const auto a = cell.find('`');
    if (a == std::string::npos) continue;
    const auto b = cell.find('`', a + 1);
    if (b == std::string::npos) continue;
    keys.push_back(cell.substr(a + 1, b - a - 1));
  }
  return keys;
}

LintReport LintTexts(const std::string& code_map, const std::string& config_reference) {
  LintReport r;
  std::map<std::string, int> seen;
  for (const auto& k : TableKeys(code_map)) ++seen[k];
  for (const auto& a : RequiredAnchors()) {
    const int n = seen.count(a.id) ? seen[a.id] : 0;
    if (n == 0) r.problems.push_back("unmapped anchor: " + a.id + " (" + a.description + ")");
    else if (n > 1) r.problems.push_back("anchor mapped " + std::to_string(n) + " times: " + a.id);
    else ++r.mapped_anchors;
  }
  for (const auto& [k, n] : seen) {
    const auto& req = RequiredAnchors();
    if (std::none_of(req.begin(), req.end(), [&](const Anchor& a) { return a.id == k; }))
      r.problems.push_back("unknown anchor in code map: " + k);
  }

  std::map<std::string, int> keys;
  for (const auto& k : TableKeys(config_reference)) ++keys[k];
  const auto& fields = training::TrainConfig::FieldNames();
  for (const auto& f : fields) {
    if (!keys.count(f)) r.problems.push_back("undocumented config key: " + f);
    else ++r.documented_keys;
  }
  for (const auto& [k, n] : keys)
    if (std::find(fields.begin(), fields.end(), k) == fields.end())
      r.problems.push_back("config reference documents unknown key: " + k);
  r.pass = r.problems.empty();
  return r;
}

namespace {

std::string Slurp(const std::filesystem::path& p, LintReport* r) {
  std::ifstream in(p);
  if (!in) {
    r->problems.push_back("missing " + p.string());
    return {};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

LintReport DocLint(const std::filesystem::path& root) {
  LintReport missing;
  const std::string map = Slurp(root / "docs" / "method_code_map.md", &missing);
  const std::string cfg = Slurp(root / "docs" / "config_reference.md", &missing);
  LintReport r = LintTexts(map, cfg);
  r.problems.insert(r.problems.begin(), missing.problems.begin(), missing.problems.end());
  r.pass = r.problems.empty();
  return r;
}

}  // namespace hotspots::docs
