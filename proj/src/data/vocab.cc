#include "hotspots/data/vocab.h"

#include <algorithm>
#include <fstream>
#include <set>

namespace hotspots::data {

Vocab::Vocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw VocabError("duplicate label in vocabulary: " + labels_[i]);
  }
}

Vocab Vocab::FromUnsorted(const std::vector<std::string>& labels) {
  std::set<std::string> unique(labels.begin(), labels.end());
  return Vocab(std::vector<std::string>(unique.begin(), unique.end()));
}

Vocab Vocab::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabError("cannot open vocabulary file: " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return Vocab(std::move(labels));
}

void Vocab::SaveFile(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw VocabError("cannot write vocabulary file: " + path.string());
  for (const auto& l : labels_) out << l << '\n';
}

int Vocab::IndexOf(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw VocabError("unknown label: " + label);
  return it->second;
}

const std::string& Vocab::Label(int index) const {
  if (index < 0 || index >= size())
    throw VocabError("label index out of range: " + std::to_string(index));
  return labels_[index];
}

}  // namespace hotspots::data
