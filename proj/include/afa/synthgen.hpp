#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "afa/core.hpp"
#include "json.hpp"

namespace afa::synthgen {

/// Encoder stand-in. Two latent bits (a, b) give label a + b; PLAX slots
/// carry `a` in the first half of the feature vector, PSAX slots carry `b`
/// in the second half. One clip per view is primary, the other degraded.
struct GeneratorSpec {
  int n_studies = 2000;
  int d = 16;
  double noise_sigma = 0.3;
  std::array<double, 2> quality_range{0.8, 1.0};
  std::array<double, 2> degraded_range{0.1, 0.4};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground truth behind one generated study (test and oracle support).
struct StudyLatents {
  int a = 0;
  int b = 0;
  int plax_primary = 0;  // slot index within the PLAX pair (0 or 1)
  int psax_primary = 0;
  std::array<double, 4> quality{};  // per slot, canonical order
};

struct GeneratedSet {
  std::vector<StudyRecord> studies;
  std::vector<StudyLatents> latents;
};

inline constexpr int kSlotsPerStudy = 4;

GeneratedSet generate_detailed(const GeneratorSpec& spec);
std::vector<StudyRecord> generate(const GeneratorSpec& spec);

/// Bayes-optimal label given the acquired slots under the generative model:
/// exact posterior over (a, b), marginalizing the unknown clip qualities and
/// primary/degraded assignment. Ties go to the lower label.
int bayes_oracle(const AcquisitionState& state, const GeneratorSpec& spec);

/// Posterior over labels {0,1,2}.
std::array<double, 3> bayes_posterior(const AcquisitionState& state, const GeneratorSpec& spec);

nlohmann::json spec_to_json(const GeneratorSpec& spec);
/// Rejects unknown keys; missing keys keep their defaults.
GeneratorSpec spec_from_json(const nlohmann::json& j);

void write_spec(const std::filesystem::path& path, const GeneratorSpec& spec);
GeneratorSpec read_spec(const std::filesystem::path& path);

}  // namespace afa::synthgen
