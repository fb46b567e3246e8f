#include "hotspots/training/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace hotspots::training {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'P', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::uint64_t Fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void Put(std::string* out, T v) {
  out->append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t limit) : buf_(buf), limit_(limit) {}
  template <typename T>
  T Get() {
    T v;
    Need(sizeof v);
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void Doubles(double* dst, std::size_t n) {
    Need(n * sizeof(double));
    std::memcpy(dst, buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::size_t pos() const { return pos_; }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > limit_) throw CheckpointError("checkpoint is truncated");
  }
  const std::string& buf_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

struct Parsed {
  json header;
  std::string buffer;
  std::size_t payload_offset = 0;
};

Parsed ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Parsed p;
  p.buffer = ss.str();
  const std::string& buf = p.buffer;
  if (buf.size() < sizeof kMagic + 4 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint file");
  if (buf.size() < sizeof kMagic + 4 + 8 + 8) throw CheckpointError("checkpoint is truncated");
  Reader r(buf, buf.size() - 8);
  r.Bytes(sizeof kMagic);
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is incompatible with this build (expects " +
                                 std::to_string(kCheckpointVersion) + ")");
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (Fnv1a(buf.data(), buf.size() - 8) != stored)
    throw CheckpointError("checkpoint is truncated or corrupt (checksum mismatch)");
  const auto header_len = r.Get<std::uint64_t>();
  try {
    p.header = json::parse(r.Bytes(header_len));
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  p.payload_offset = r.pos();
  return p;
}

// Fills tensors in header order; `accept(name)` chooses which go to `model`.
template <typename Accept>
void Restore(const Parsed& p, nn::ParameterList& params, Accept accept, bool require_all) {
  Reader r(p.buffer, p.buffer.size() - 8);
  r.Bytes(p.payload_offset);
  std::map<std::string, Tensor*> param_by_name;
  for (auto& np : params.params) param_by_name[np.name] = &np.var.mutable_value();
  std::map<std::string, std::vector<double>*> buffer_by_name;
  for (auto& nb : params.buffers) buffer_by_name[nb.name] = nb.data;

  std::size_t restored = 0;
  for (const auto& entry : p.header.at("tensors")) {
    const std::string name = entry.at("name");
    const Shape shape = entry.at("shape").get<Shape>();
    const bool is_buffer = entry.value("buffer", false);
    const std::size_t n = NumElements(shape);
    std::vector<double> values(n);
    r.Doubles(values.data(), n);
    if (!accept(name)) continue;
    if (is_buffer) {
      auto it = buffer_by_name.find(name);
      if (it == buffer_by_name.end() || it->second->size() != n)
        throw CheckpointError("checkpoint buffer does not match the model: " + name);
      *it->second = std::move(values);
    } else {
      auto it = param_by_name.find(name);
      if (it == param_by_name.end() || it->second->shape() != shape)
        throw CheckpointError("checkpoint parameter does not match the model: " + name);
      std::copy(values.begin(), values.end(), it->second->data());
    }
    ++restored;
  }
  if (require_all && restored != params.params.size() + params.buffers.size())
    throw CheckpointError("checkpoint does not cover every model tensor");
}

}  // namespace

void SaveCheckpoint(Model& model, const std::filesystem::path& path, const CheckpointMeta& meta) {
  json tensors = json::array();
  for (const auto& p : model.parameters().params)
    tensors.push_back({{"name", p.name}, {"shape", p.var.shape()}});
  for (const auto& b : model.parameters().buffers)
    tensors.push_back(
        {{"name", b.name}, {"shape", Shape{static_cast<int>(b.data->size())}}, {"buffer", true}});
  const json header = {{"config", model.config().ToJson()},
                       {"actions", model.actions().labels()},
                       {"objects", model.objects().labels()},
                       {"epoch", meta.epoch},
                       {"rng_state", meta.rng_state},
                       {"tensors", tensors}};
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  Put<std::uint32_t>(&out, kCheckpointVersion);
  Put<std::uint64_t>(&out, header_text.size());
  out += header_text;
  for (const auto& p : model.parameters().params)
    out.append(reinterpret_cast<const char*>(p.var.value().data()),
               p.var.value().size() * sizeof(double));
  for (const auto& b : model.parameters().buffers)
    out.append(reinterpret_cast<const char*>(b.data->data()), b.data->size() * sizeof(double));
  Put<std::uint64_t>(&out, Fnv1a(out.data(), out.size()));

  // Write-then-rename so a crash never leaves a half-written checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  const Parsed p = ReadFile(path);
  LoadedCheckpoint out;
  try {
    const TrainConfig config = TrainConfig::FromJson(p.header.at("config"));
    data::Vocab actions(p.header.at("actions").get<std::vector<std::string>>());
    data::Vocab objects(p.header.at("objects").get<std::vector<std::string>>());
    auto model = MakeModel(config, actions, objects);
    Restore(p, model->parameters(), [](const std::string&) { return true; }, true);
    out.meta.epoch = p.header.value("epoch", 0);
    out.meta.rng_state = p.header.value("rng_state", "");
    out.model = std::move(model);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  return out;
}

void LoadEncoderWeights(Model& model, const std::filesystem::path& path) {
  const Parsed p = ReadFile(path);
  Restore(
      p, model.parameters(),
      [](const std::string& name) { return name.rfind("encoder", 0) == 0; }, false);
}

}  // namespace hotspots::training
