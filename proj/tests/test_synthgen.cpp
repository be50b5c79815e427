#include <cmath>

#include "afa/synthgen.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace afa;
using synthgen::GeneratorSpec;

namespace {

double oracle_accuracy(const synthgen::GeneratedSet& set, const GeneratorSpec& spec, const Mask& mask) {
  int hit = 0;
  for (const auto& s : set.studies) hit += synthgen::bayes_oracle(apply_mask(s, mask), spec) == s.label;
  return static_cast<double>(hit) / static_cast<double>(set.studies.size());
}

}  // namespace

TEST_CASE("noiseless generation exposes the latent bits at clip quality") {
  GeneratorSpec spec;
  spec.n_studies = 200;
  spec.noise_sigma = 0.0;
  const auto set = synthgen::generate_detailed(spec);
  int checked = 0;
  for (std::size_t i = 0; i < set.studies.size(); ++i) {
    const auto& lat = set.latents[i];
    const auto& s = set.studies[i];
    CHECK(s.label == lat.a + lat.b);
    for (int slot = 0; slot < 4; ++slot) {
      const auto& f = s.slots[slot].features;
      const bool plax = slot < 2;
      const double q = static_cast<float>(lat.quality[slot]);
      const double sa = 2.0 * lat.a - 1.0, sb = 2.0 * lat.b - 1.0;
      for (int j = 0; j < 16; ++j) {
        const double expect = plax ? (j < 8 ? q * sa : 0.0) : (j < 8 ? 0.0 : q * sb);
        CHECK(f[j] == doctest::Approx(expect).epsilon(1e-6));
      }
    }
    if (lat.a == 1) {
      const auto& f = s.slots[lat.plax_primary].features;
      CHECK(f.head(8).minCoeff() >= 0.8f - 1e-6f);
      CHECK(f.tail(8).isZero(0.0));
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("primary and degraded qualities come from their ranges") {
  GeneratorSpec spec;
  spec.n_studies = 500;
  const auto set = synthgen::generate_detailed(spec);
  for (const auto& lat : set.latents) {
    for (int view = 0; view < 2; ++view) {
      const int primary = view == 0 ? lat.plax_primary : lat.psax_primary;
      for (int k = 0; k < 2; ++k) {
        const double q = lat.quality[2 * view + k];
        if (k == primary) {
          CHECK(q >= 0.8);
          CHECK(q <= 1.0);
        } else {
          CHECK(q >= 0.1);
          CHECK(q <= 0.4);
        }
      }
    }
  }
}

TEST_CASE("label distribution over 1e4 studies is within 3 sigma of {1/4, 1/2, 1/4}") {
  GeneratorSpec spec;
  spec.n_studies = 10000;
  spec.seed = 99;
  const auto studies = synthgen::generate(spec);
  std::array<int, 3> counts{};
  for (const auto& s : studies) ++counts[s.label];
  const std::array<double, 3> p{0.25, 0.5, 0.25};
  for (int c = 0; c < 3; ++c) {
    const double n = 10000.0, sd = std::sqrt(n * p[c] * (1 - p[c]));
    CHECK(std::abs(counts[c] - n * p[c]) <= 3 * sd);
  }
}

TEST_CASE("bayes oracle hand cases") {
  GeneratorSpec spec;
  spec.n_studies = 64;
  spec.noise_sigma = 0.0;
  const auto set = synthgen::generate_detailed(spec);

  SUBCASE("empty state -> label 1 with posterior (1/4, 1/2, 1/4)") {
    const auto empty = apply_mask(set.studies[0], Mask(4, false));
    CHECK(synthgen::bayes_oracle(empty, spec) == 1);
    const auto p = synthgen::bayes_posterior(empty, spec);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.25).epsilon(1e-12));
    GeneratorSpec noisy = spec;
    noisy.noise_sigma = 0.3;
    CHECK(synthgen::bayes_oracle(empty, noisy) == 1);
  }

  SUBCASE("both PLAX only, noiseless, a = 0 -> label 0 (0/1 tie goes low)") {
    int seen = 0;
    for (std::size_t i = 0; i < set.studies.size(); ++i) {
      if (set.latents[i].a != 0) continue;
      const auto st = apply_mask(set.studies[i], {true, true, false, false});
      CHECK(synthgen::bayes_oracle(st, spec) == 0);
      const auto p = synthgen::bayes_posterior(st, spec);
      CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(p[2] == 0.0);
      ++seen;
    }
    CHECK(seen > 0);
  }

  SUBCASE("one PLAX + one PSAX, noiseless -> exact label") {
    for (const auto& s : set.studies)
      for (int p = 0; p < 2; ++p)
        for (int q = 2; q < 4; ++q) {
          Mask m(4, false);
          m[p] = m[q] = true;
          CHECK(synthgen::bayes_oracle(apply_mask(s, m), spec) == s.label);
        }
  }
}

TEST_CASE("PLAX-only Bayes accuracy is exactly one half") {
  // With a known and b unknown the posterior splits evenly between two
  // adjacent labels; the lower one is chosen, which is right iff b = 0.
  GeneratorSpec spec;
  spec.n_studies = 4000;
  spec.noise_sigma = 0.0;
  const auto set = synthgen::generate_detailed(spec);
  int b_zero = 0;
  for (const auto& l : set.latents) b_zero += l.b == 0;
  const double acc = oracle_accuracy(set, spec, {true, true, false, false});
  CHECK(acc == static_cast<double>(b_zero) / 4000.0);
  CHECK(acc == doctest::Approx(0.5).epsilon(0.05));

  // Closed form over the four equiprobable (a, b): correct for (0,0) and (1,0).
  double exact = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const int predicted = a == 0 ? 0 : 1;
      exact += 0.25 * (predicted == a + b);
    }
  CHECK(exact == 0.5);
}

TEST_CASE("noiseless oracle is perfect with one good clip per view") {
  GeneratorSpec spec;
  spec.n_studies = 300;
  spec.noise_sigma = 0.0;
  const auto set = synthgen::generate_detailed(spec);
  for (std::size_t i = 0; i < set.studies.size(); ++i) {
    Mask m(4, false);
    m[set.latents[i].plax_primary] = true;
    m[2 + set.latents[i].psax_primary] = true;
    CHECK(synthgen::bayes_oracle(apply_mask(set.studies[i], m), spec) == set.studies[i].label);
    CHECK(synthgen::bayes_oracle(apply_mask(set.studies[i], Mask(4, true)), spec) == set.studies[i].label);
  }
}

TEST_CASE("bayes posterior agrees with a brute-force Simpson reference") {
  std::mt19937_64 rng(21);
  for (double sigma : {0.3, 0.8}) {
    GeneratorSpec spec;
    spec.n_studies = 12;
    spec.noise_sigma = sigma;
    spec.d = 8;
    const auto studies = synthgen::generate(spec);
    for (const auto& s : studies) {
      for (int rep = 0; rep < 3; ++rep) {
        const auto st = apply_mask(s, test::random_mask(rng, 4));
        const auto got = synthgen::bayes_posterior(st, spec);
        const auto ref = oracle::bayes_posterior(st, spec);
        for (int c = 0; c < 3; ++c) CHECK(got[c] == doctest::Approx(ref[c]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("oracle accuracy is non-increasing over a noise grid") {
  double prev = 1.1;
  for (double sigma : {0.0, 0.3, 0.7, 1.2, 2.0, 3.5}) {
    GeneratorSpec spec;
    spec.n_studies = 3000;
    spec.noise_sigma = sigma;
    spec.seed = 5;
    const auto set = synthgen::generate_detailed(spec);
    const double acc = oracle_accuracy(set, spec, Mask(4, true));
    MESSAGE("sigma " << sigma << " -> " << acc);
    CHECK(acc <= prev);
    prev = acc;
  }
}

TEST_CASE("generation is reproducible to the byte") {
  GeneratorSpec spec;
  spec.n_studies = 50;
  const auto dir = test::temp_dir("synth_repro");
  write_dataset(dir / "a.jsonl", synthgen::generate(spec));
  write_dataset(dir / "b.jsonl", synthgen::generate(spec));
  CHECK(test::slurp(dir / "a.jsonl") == test::slurp(dir / "b.jsonl"));
  spec.seed = 2;
  write_dataset(dir / "c.jsonl", synthgen::generate(spec));
  CHECK(test::slurp(dir / "a.jsonl") != test::slurp(dir / "c.jsonl"));
}

TEST_CASE("study i does not depend on n_studies") {
  GeneratorSpec a, b;
  a.n_studies = 10;
  b.n_studies = 40;
  const auto x = synthgen::generate(a), y = synthgen::generate(b);
  for (int i = 0; i < 10; ++i) CHECK(study_to_json_line(x[i]) == study_to_json_line(y[i]));
}

TEST_CASE("generator spec validation and JSON") {
  GeneratorSpec spec;
  spec.d = 7;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.d = 2;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.quality_range = {0.9, 0.8};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.degraded_range = {0.0, 0.4};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.noise_sigma = -0.1;
  CHECK_THROWS_AS(synthgen::generate(spec), Error);

  spec = {};
  spec.seed = 123456789012345ULL;
  spec.noise_sigma = 0.45;
  const auto back = synthgen::spec_from_json(synthgen::spec_to_json(spec));
  CHECK(back.seed == spec.seed);
  CHECK(back.noise_sigma == spec.noise_sigma);
  CHECK(back.quality_range == spec.quality_range);
  CHECK_THROWS_AS(synthgen::spec_from_json({{"sigma", 0.3}}), Error);
}
