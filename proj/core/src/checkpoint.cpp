#include "neverup/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include "neverup/errors.hpp"

namespace neverup {
namespace {

constexpr char kMagic[4] = {'N', 'G', 'U', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw DataError(std::string("checkpoint: truncated reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedParamConst>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.tensor->shape.size()));
    for (int d : t.tensor->shape) write_u32(os, static_cast<std::uint32_t>(d));
  }
  for (const auto& t : tensors)
    os.write(reinterpret_cast<const char*>(t.tensor->v.data()),
             static_cast<std::streamsize>(t.tensor->v.size() * sizeof(float)));
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kMagic, 4))
    throw DataError("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(is, "version");
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = read_u32(is, "tensor count");

  struct Entry {
    std::string name;
    Shape shape;
  };
  std::vector<Entry> manifest;
  manifest.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = read_u32(is, "name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw DataError("checkpoint: truncated name");
    const std::uint32_t ndim = read_u32(is, "rank");
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(is, "dim"));
    manifest.push_back({std::move(name), std::move(shape)});
  }

  std::map<std::string, Tensor> out;
  for (Entry& e : manifest) {
    Tensor t = Tensor::zeros(e.shape);
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!is) throw DataError("checkpoint: truncated payload for " + e.name);
    if (!out.emplace(e.name, std::move(t)).second)
      throw DataError("checkpoint: duplicate tensor " + e.name);
  }
  return out;
}

void restore_params(std::vector<NamedParam> params, const std::map<std::string, Tensor>& loaded) {
  for (NamedParam& p : params) {
    auto it = loaded.find(p.name);
    if (it == loaded.end()) throw DataError("checkpoint: missing tensor " + p.name);
    if (it->second.shape != p.tensor->shape)
      throw DataError("checkpoint: shape mismatch for " + p.name + ": file has " +
                      shape_str(it->second.shape) + ", network has " + shape_str(p.tensor->shape));
    p.tensor->v = it->second.v;
  }
}

}  // namespace neverup
