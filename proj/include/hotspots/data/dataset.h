#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hotspots/core/image.h"
#include "hotspots/data/heatmap.h"
#include "hotspots/data/vocab.h"

namespace hotspots::data {

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public LoadError {
 public:
  using LoadError::LoadError;
};

enum class InactiveSource { kCatalog, kPreInteractionFrame, kCroppedBox };
const char* InactiveSourceName(InactiveSource s);
InactiveSource ParseInactiveSource(const std::string& name);

// One manifest line, with paths resolved against the manifest directory.
struct InstanceRecord {
  std::string id;
  std::filesystem::path frames_dir;
  std::vector<std::filesystem::path> frame_files;  // sorted by filename
  std::filesystem::path inactive_image;
  InactiveSource inactive_source = InactiveSource::kCatalog;
  int action = 0;
  std::optional<int> object;
  std::optional<std::filesystem::path> negative_image;
  std::optional<KeypointAnnotation> annotation;
  std::string split;  // empty, "train" or "test"

  bool operator==(const InstanceRecord& o) const;
};

struct Dataset {
  Vocab actions;
  Vocab objects;
  std::vector<InstanceRecord> instances;
  std::filesystem::path root;

  const InstanceRecord& Find(const std::string& id) const;
  int IndexOf(const std::string& id) const;
  bool SameContent(const Dataset& other) const {
    return actions == other.actions && objects == other.objects &&
           instances == other.instances;
  }
};

struct ManifestOptions {
  // Vocabulary files; when unset, `actions.txt` / `objects.txt` next to the
  // manifest are used if present, else labels are sorted lexicographically.
  std::optional<std::filesystem::path> actions_vocab;
  std::optional<std::filesystem::path> objects_vocab;
  // Validate that every referenced image decodes (not just that it exists).
  bool decode_images = false;
};

Dataset LoadManifest(const std::filesystem::path& path,
                     const ManifestOptions& options = {});
// Writes manifest lines with paths relative to the manifest's directory, plus
// the two vocabulary files alongside it.
void WriteManifest(const Dataset& dataset, const std::filesystem::path& path);

// Ground-truth sidecar: JSON lines {"id", "action", "heatmap"} mapping an
// instance to a 16-bit grayscale PNG.
struct GtSidecarEntry {
  std::string id;
  std::string action;
  std::filesystem::path heatmap;
};
std::vector<GtSidecarEntry> LoadGtSidecar(const std::filesystem::path& path);
void WriteGtSidecar(const std::vector<GtSidecarEntry>& entries,
                    const std::filesystem::path& path);
Heatmap LoadGtHeatmap(const std::filesystem::path& png);

// In-memory training types.
struct VideoClip {
  std::vector<RgbImage> frames;
  int action = 0;
  std::optional<int> object;

  int length() const { return static_cast<int>(frames.size()); }
};

struct InactiveImage {
  std::string id;
  RgbImage image;
  std::optional<int> object;
  InactiveSource source = InactiveSource::kCatalog;
};

struct TrainInstance {
  std::string id;
  VideoClip clip;
  InactiveImage inactive;
  std::optional<InactiveImage> negative;
};

// Checks the type-level invariants (frame dimensions, labels, negative class).
void ValidateInstance(const TrainInstance& instance, int num_actions);

// Reads frames and images for one record, centre-cropped and resized to
// input_size x input_size.
TrainInstance LoadInstance(const Dataset& dataset, const InstanceRecord& record,
                           int input_size);
InactiveImage LoadInactive(const std::string& id, const std::filesystem::path& path,
                           std::optional<int> object, int input_size);

// Index of a uniformly drawn instance whose inactive image shows a different
// object class. `candidates` limits the draw to those instance indices when
// non-empty.
int SampleNegativeIndex(const Dataset& dataset, int object, std::mt19937_64& rng,
                        const std::vector<int>& candidates = {});
InactiveImage SampleNegative(const Dataset& dataset, int object,
                             std::mt19937_64& rng, int input_size);

}  // namespace hotspots::data
