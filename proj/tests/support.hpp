#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afa/core.hpp"
#include "afa/synthgen.hpp"

namespace afa::test {

inline StudyRecord random_study(std::mt19937_64& rng, int n = 4, int d = 6, int label = -1) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_int_distribution<int> lab(0, 2);
  StudyRecord s;
  s.study_id = "r" + std::to_string(rng() % 100000);
  s.label = label >= 0 ? label : lab(rng);
  const auto views = default_view_scheme();
  for (int i = 0; i < n; ++i) {
    ViewSlot v;
    v.view = n == 4 ? views[static_cast<std::size_t>(i)] : (i < n / 2 ? "PLAX" : "PSAX");
    v.features = FeatureVector(d);
    for (int j = 0; j < d; ++j) v.features[j] = g(rng);
    s.slots.push_back(std::move(v));
  }
  return s;
}

inline Mask random_mask(std::mt19937_64& rng, int n) {
  Mask m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = (rng() & 1U) != 0;
  return m;
}

/// The 16-study noiseless toy set: each (a, b) combination four times, with
/// the primary clip position varied.
inline std::vector<StudyRecord> toy_studies(int n_studies = 16) {
  synthgen::GeneratorSpec spec;
  spec.n_studies = n_studies;
  spec.noise_sigma = 0.0;
  spec.seed = 11;
  return synthgen::generate(spec);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("afa_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace afa::test
