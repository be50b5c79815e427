#include "afa/neural/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "afa/json_util.hpp"

namespace afa::nn {

namespace {

constexpr const char* kFormat = "afa-checkpoint-v1";

void put_le32(std::string& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((u >> (8 * k)) & 0xFFu));
}

float get_le32(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return std::bit_cast<float>(u);
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".json";
  return p;
}

std::filesystem::path blob_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".bin";
  return p;
}

void write_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt) {
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& name : ckpt.order) {
    const auto& t = ckpt.tensors.at(name);
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"byte_offset", blob.size()}});
    for (float f : t.values) put_le32(blob, f);
  }
  nlohmann::json manifest = {{"format", kFormat},
                             {"blob", blob_path(stem).filename().string()},
                             {"dtype", "float32-le"},
                             {"tensors", tensors},
                             {"meta", ckpt.meta}};
  json_util::write_file(manifest_path(stem), manifest);
  std::ofstream out(blob_path(stem), std::ios::binary);
  if (!out) throw Error("io", "cannot write " + blob_path(stem).string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& stem) {
  const auto manifest = json_util::read_file(manifest_path(stem));
  if (manifest.value("format", "") != kFormat) throw Error("checkpoint", manifest_path(stem).string() + ": unknown format");
  std::ifstream in(manifest_path(stem).parent_path() / manifest.at("blob").get<std::string>(), std::ios::binary);
  if (!in) throw Error("io", "cannot open checkpoint blob for " + stem.string());
  const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& jt : manifest.at("tensors")) {
    Checkpoint::Tensor t;
    t.shape = jt.at("shape").get<std::vector<int>>();
    std::size_t count = 1;
    for (int s : t.shape) count *= static_cast<std::size_t>(s);
    const auto offset = jt.at("byte_offset").get<std::size_t>();
    if (offset + 4 * count > blob.size()) throw Error("checkpoint", "blob too short for tensor " + jt.at("name").get<std::string>());
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.values[i] = get_le32(blob.data() + offset + 4 * i);
    const auto name = jt.at("name").get<std::string>();
    ckpt.order.push_back(name);
    ckpt.tensors.emplace(name, std::move(t));
  }
  return ckpt;
}

}  // namespace afa::nn
