#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "afa/neural/types.hpp"
#include "json.hpp"

namespace afa::nn {

/// On-disk model: `<stem>.json` manifest ({name, shape, byte_offset} per
/// tensor plus free-form metadata) and `<stem>.bin`, little-endian float32,
/// row-major, tensors concatenated in manifest order.
struct Checkpoint {
  struct Tensor {
    std::vector<int> shape;
    std::vector<float> values;
  };
  nlohmann::json meta;
  std::vector<std::string> order;
  std::map<std::string, Tensor> tensors;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);

void write_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& stem);

template <typename Scalar>
void append_params(Checkpoint& ckpt, const ParamRefs<Scalar>& params, const std::string& prefix = "") {
  for (auto* p : params) {
    Checkpoint::Tensor t;
    t.shape = p->shape();
    t.values.resize(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) t.values[static_cast<std::size_t>(i)] = static_cast<float>(p->value.data()[i]);
    const auto name = prefix + p->name;
    if (ckpt.tensors.count(name)) throw Error("checkpoint", "duplicate tensor name '" + name + "'");
    ckpt.order.push_back(name);
    ckpt.tensors.emplace(name, std::move(t));
  }
}

/// Assigns tensors by name; any missing tensor or shape disagreement is an
/// architecture mismatch.
template <typename Scalar>
void assign_params(const Checkpoint& ckpt, const ParamRefs<Scalar>& params, const std::string& prefix = "") {
  for (auto* p : params) {
    const auto name = prefix + p->name;
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw Error("checkpoint", "architecture mismatch: tensor '" + name + "' missing");
    if (it->second.shape != p->shape())
      throw Error("checkpoint", "architecture mismatch: tensor '" + name + "' has shape [" +
                                    std::to_string(it->second.shape.at(0)) + "," + std::to_string(it->second.shape.at(1)) +
                                    "], model expects [" + std::to_string(p->value.rows()) + "," +
                                    std::to_string(p->value.cols()) + "]");
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = static_cast<Scalar>(it->second.values[static_cast<std::size_t>(i)]);
  }
}

}  // namespace afa::nn
