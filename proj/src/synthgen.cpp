#include "afa/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "afa/json_util.hpp"

namespace afa::synthgen {

namespace {

constexpr int kQuadraturePoints = 256;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double m = std::max(x, y);
  return m + std::log(std::exp(x - m) + std::exp(y - m));
}

// log of the q-marginal likelihood (up to a per-slot constant shared by both
// signs) for a slot whose exposed half sums to `sum` over `h` dims.
double log_quality_marginal(double sum, int h, int sign, std::array<double, 2> range, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  auto term = [&](double q) { return (2.0 * q * sign * sum - q * q * h) * inv; };
  if (range[1] <= range[0]) return term(range[0]);
  const double width = range[1] - range[0];
  double acc = kNegInf;
  for (int k = 0; k < kQuadraturePoints; ++k) {
    const double q = range[0] + width * (k + 0.5) / kQuadraturePoints;
    acc = log_add(acc, term(q));
  }
  return acc - std::log(static_cast<double>(kQuadraturePoints));
}

// Log-likelihood of one view's acquired clips given the view's latent sign.
double log_view_likelihood(const AcquisitionState& state, int first_slot, int half_begin, int h, int sign,
                           const GeneratorSpec& spec) {
  const bool have0 = state.mask[first_slot];
  const bool have1 = state.mask[first_slot + 1];
  if (!have0 && !have1) return 0.0;

  const double sigma = spec.noise_sigma;
  std::array<double, 2> sums{};
  for (int k = 0; k < 2; ++k)
    sums[k] = state.features.row(first_slot + k).segment(half_begin, h).cast<double>().sum();

  if (sigma == 0.0) {
    // Noiseless: every acquired clip reveals the sign exactly (quality > 0).
    for (int k = 0; k < 2; ++k) {
      if (!state.mask[first_slot + k]) continue;
      if ((sums[k] > 0 ? 1 : -1) != sign) return kNegInf;
    }
    return 0.0;
  }

  auto primary = [&](int k) { return log_quality_marginal(sums[k], h, sign, spec.quality_range, sigma); };
  auto degraded = [&](int k) { return log_quality_marginal(sums[k], h, sign, spec.degraded_range, sigma); };
  const double half = std::log(0.5);
  if (have0 && have1)
    return log_add(half + primary(0) + degraded(1), half + degraded(0) + primary(1));
  const int k = have0 ? 0 : 1;
  return log_add(half + primary(k), half + degraded(k));
}

}  // namespace

void GeneratorSpec::validate() const {
  if (n_studies < 0) throw Error("generator", "n_studies must be >= 0");
  if (d < 4 || d % 2 != 0) throw Error("generator", "d must be even and >= 4");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("generator", "noise_sigma must be >= 0");
  auto check_range = [](std::array<double, 2> r, const char* name) {
    if (!(r[0] > 0.0 && r[0] <= r[1] && r[1] <= 1.0))
      throw Error("generator", std::string(name) + " must satisfy 0 < lo <= hi <= 1");
  };
  check_range(quality_range, "quality_range");
  check_range(degraded_range, "degraded_range");
}

GeneratedSet generate_detailed(const GeneratorSpec& spec) {
  spec.validate();
  GeneratedSet out;
  out.studies.reserve(spec.n_studies);
  out.latents.reserve(spec.n_studies);
  const int h = spec.d / 2;
  const auto views = default_view_scheme();

  for (int i = 0; i < spec.n_studies; ++i) {
    // Per-study stream keyed by (seed, index).
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    StudyLatents lat;
    lat.a = coin(rng) ? 1 : 0;
    lat.b = coin(rng) ? 1 : 0;
    lat.plax_primary = coin(rng) ? 1 : 0;
    lat.psax_primary = coin(rng) ? 1 : 0;
    auto draw = [&](std::array<double, 2> r) { return r[0] + (r[1] - r[0]) * unit(rng); };
    for (int view = 0; view < 2; ++view) {
      const int primary = view == 0 ? lat.plax_primary : lat.psax_primary;
      for (int k = 0; k < 2; ++k)
        lat.quality[2 * view + k] = draw(k == primary ? spec.quality_range : spec.degraded_range);
    }

    StudyRecord study;
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%06d", i);
    study.study_id = id;
    study.label = lat.a + lat.b;
    for (int s = 0; s < kSlotsPerStudy; ++s) {
      const bool plax = s < 2;
      const double q = lat.quality[s];
      const double sign_a = 2.0 * lat.a - 1.0;
      const double sign_b = 2.0 * lat.b - 1.0;
      ViewSlot slot;
      slot.view = views[s];
      slot.cost = 1.0;
      slot.features.resize(spec.d);
      for (int j = 0; j < spec.d; ++j) {
        const bool first_half = j < h;
        double mean = 0.0;
        if (plax && first_half) mean = q * sign_a;
        if (!plax && !first_half) mean = q * sign_b;
        slot.features[j] = static_cast<float>(mean + spec.noise_sigma * gauss(rng));
      }
      study.slots.push_back(std::move(slot));
    }
    out.studies.push_back(std::move(study));
    out.latents.push_back(lat);
  }
  return out;
}

std::vector<StudyRecord> generate(const GeneratorSpec& spec) { return generate_detailed(spec).studies; }

std::array<double, 3> bayes_posterior(const AcquisitionState& state, const GeneratorSpec& spec) {
  if (state.n_slots() != kSlotsPerStudy || state.features.cols() != spec.d)
    throw Error("shape", "state does not match the generator layout");
  const int h = spec.d / 2;
  std::array<double, 2> la{}, lb{};  // index 0: bit = 0 (sign -1), 1: bit = 1
  for (int bit = 0; bit < 2; ++bit) {
    la[bit] = log_view_likelihood(state, 0, 0, h, 2 * bit - 1, spec);
    lb[bit] = log_view_likelihood(state, 2, h, h, 2 * bit - 1, spec);
  }
  std::array<double, 3> logp{la[0] + lb[0], log_add(la[1] + lb[0], la[0] + lb[1]), la[1] + lb[1]};
  const double norm = log_add(log_add(logp[0], logp[1]), logp[2]);
  std::array<double, 3> p{};
  for (int c = 0; c < 3; ++c) p[c] = std::exp(logp[c] - norm);
  return p;
}

int bayes_oracle(const AcquisitionState& state, const GeneratorSpec& spec) {
  const auto p = bayes_posterior(state, spec);
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (p[c] > p[best] * (1.0 + 1e-12)) best = c;
  return best;
}

nlohmann::json spec_to_json(const GeneratorSpec& spec) {
  return {{"n_studies", spec.n_studies},
          {"d", spec.d},
          {"noise_sigma", spec.noise_sigma},
          {"quality_range", spec.quality_range},
          {"degraded_range", spec.degraded_range},
          {"seed", spec.seed}};
}

GeneratorSpec spec_from_json(const nlohmann::json& j) {
  const std::string ctx = "generator";
  json_util::reject_unknown(j, {"n_studies", "d", "noise_sigma", "quality_range", "degraded_range", "seed"}, ctx);
  GeneratorSpec spec;
  json_util::read(j, "n_studies", spec.n_studies, ctx);
  json_util::read(j, "d", spec.d, ctx);
  json_util::read(j, "noise_sigma", spec.noise_sigma, ctx);
  json_util::read(j, "quality_range", spec.quality_range, ctx);
  json_util::read(j, "degraded_range", spec.degraded_range, ctx);
  json_util::read(j, "seed", spec.seed, ctx);
  return spec;
}

void write_spec(const std::filesystem::path& path, const GeneratorSpec& spec) {
  json_util::write_file(path, spec_to_json(spec));
}

GeneratorSpec read_spec(const std::filesystem::path& path) { return spec_from_json(json_util::read_file(path)); }

}  // namespace afa::synthgen
