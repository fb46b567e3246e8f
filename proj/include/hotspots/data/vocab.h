#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hotspots::data {

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered label set with a contiguous index <-> label bijection.
class Vocab {
 public:
  Vocab() = default;
  // Labels are taken in the given order; duplicates are rejected.
  explicit Vocab(std::vector<std::string> labels);
  // Sorted-lexicographic vocabulary over the distinct input labels.
  static Vocab FromUnsorted(const std::vector<std::string>& labels);
  // One label per line; blank lines ignored.
  static Vocab LoadFile(const std::filesystem::path& path);
  void SaveFile(const std::filesystem::path& path) const;

  int IndexOf(const std::string& label) const;
  bool Contains(const std::string& label) const { return index_.count(label) > 0; }
  const std::string& Label(int index) const;
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const Vocab& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

}  // namespace hotspots::data
