#include "afa/core.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

namespace afa {

namespace {

template <typename T>
void append_number(std::string& out, T value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("io", "number formatting failed");
  out.append(buf, end);
}

void append_json_string(std::string& out, const std::string& s) {
  out += nlohmann::json(s).dump();
}

}  // namespace

int AcquisitionState::acquired_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

std::uint32_t AcquisitionState::mask_bits() const {
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < mask.size() && i < 32; ++i)
    if (mask[i]) bits |= (1u << i);
  return bits;
}

bool AcquisitionState::operator==(const AcquisitionState& other) const {
  return mask == other.mask && steps_taken == other.steps_taken && terminal == other.terminal &&
         features.rows() == other.features.rows() && features.cols() == other.features.cols() &&
         features == other.features;
}

Action Action::acquire(int slot) {
  if (slot < 0) throw Error("action", "acquire index must be nonnegative");
  return Action(slot);
}

Action Action::from_index(int index, int n_slots) {
  if (index < 0 || index > n_slots)
    throw Error("action", "action index " + std::to_string(index) + " out of range for N=" + std::to_string(n_slots));
  return index == 0 ? terminate() : acquire(index - 1);
}

int Action::slot() const {
  if (is_terminate()) throw Error("action", "terminate has no slot");
  return slot_;
}

std::vector<std::string> default_view_scheme() { return {"PLAX", "PLAX", "PSAX", "PSAX"}; }

std::vector<std::string> slot_names(const StudyRecord& study) {
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& slot : study.slots) names.push_back(slot.view + "_" + std::to_string(++seen[slot.view]));
  return names;
}

void validate_study(const StudyRecord& study, int expected_n, int expected_d) {
  const std::string who = "study '" + study.study_id + "'";
  if (study.label < 0 || study.label >= kNumClasses)
    throw Error("dataset", who + ": label " + std::to_string(study.label) + " out of range {0,1,2}");
  if (expected_n > 0 && study.n_slots() != expected_n)
    throw Error("dataset", who + ": has " + std::to_string(study.n_slots()) + " slots, expected " +
                               std::to_string(expected_n));
  for (const auto& slot : study.slots) {
    if (expected_d > 0 && slot.features.size() != expected_d)
      throw Error("dataset", who + ": feature dimension " + std::to_string(slot.features.size()) +
                                 " inconsistent with D=" + std::to_string(expected_d));
    if (!(slot.cost >= 0.0) || !std::isfinite(slot.cost)) throw Error("dataset", who + ": slot cost must be finite and >= 0");
    if (!slot.features.allFinite()) throw Error("dataset", who + ": non-finite feature value");
  }
}

std::string study_to_json_line(const StudyRecord& study) {
  std::string out = "{\"study_id\": ";
  append_json_string(out, study.study_id);
  out += ", \"label\": ";
  append_number(out, study.label);
  out += ", \"slots\": [";
  for (std::size_t s = 0; s < study.slots.size(); ++s) {
    const auto& slot = study.slots[s];
    if (s) out += ", ";
    out += "{\"view\": ";
    append_json_string(out, slot.view);
    out += ", \"cost\": ";
    append_number(out, slot.cost);
    out += ", \"features\": [";
    for (Eigen::Index j = 0; j < slot.features.size(); ++j) {
      if (j) out += ", ";
      append_number(out, slot.features[j]);
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

StudyRecord study_from_json_line(const std::string& line) {
  const auto doc = nlohmann::json::parse(line);
  StudyRecord study;
  study.study_id = doc.at("study_id").get<std::string>();
  study.label = doc.at("label").get<int>();
  for (const auto& js : doc.at("slots")) {
    ViewSlot slot;
    slot.view = js.at("view").get<std::string>();
    slot.cost = js.contains("cost") ? js.at("cost").get<double>() : 1.0;
    const auto& feats = js.at("features");
    slot.features.resize(static_cast<Eigen::Index>(feats.size()));
    for (std::size_t j = 0; j < feats.size(); ++j) slot.features[static_cast<Eigen::Index>(j)] = feats[j].get<float>();
    study.slots.push_back(std::move(slot));
  }
  return study;
}

DatasetSummary summarize(const std::vector<StudyRecord>& studies) {
  DatasetSummary summary;
  summary.n_studies = studies.size();
  if (!studies.empty()) {
    summary.n_slots = studies.front().n_slots();
    summary.feature_dim = studies.front().feature_dim();
  }
  for (const auto& s : studies) ++summary.class_counts[s.label];
  return summary;
}

Dataset load_dataset(const std::filesystem::path& path, int expected_n, int expected_d) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open dataset file " + path.string());
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    StudyRecord study;
    try {
      study = study_from_json_line(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("dataset", path.string() + ":" + std::to_string(line_no) + ": malformed study line: " + e.what());
    }
    if (expected_d <= 0) expected_d = study.feature_dim();
    try {
      validate_study(study, expected_n, expected_d);
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    dataset.studies.push_back(std::move(study));
  }
  dataset.summary = summarize(dataset.studies);
  return dataset;
}

void write_dataset(const std::filesystem::path& path, const std::vector<StudyRecord>& studies) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write dataset file " + path.string());
  for (const auto& s : studies) out << study_to_json_line(s) << '\n';
}

Splits split_dataset(const std::vector<StudyRecord>& studies, SplitFractions fractions, std::uint64_t seed) {
  if (studies.empty()) throw Error("split", "cannot split an empty dataset");
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
    throw Error("split", "split fractions must be nonnegative and sum to 1");

  std::vector<std::size_t> order(studies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = studies.size();
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n) + 1e-9));
  const auto n_train = n - n_val - n_test;

  Splits splits;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = studies[order[k]];
    if (k < n_train)
      splits.train.push_back(s);
    else if (k < n_train + n_val)
      splits.val.push_back(s);
    else
      splits.test.push_back(s);
  }
  return splits;
}

AcquisitionState apply_mask(const StudyRecord& study, const Mask& mask) {
  if (static_cast<int>(mask.size()) != study.n_slots())
    throw Error("shape", "mask length " + std::to_string(mask.size()) + " does not match N=" +
                             std::to_string(study.n_slots()));
  AcquisitionState state;
  state.mask = mask;
  state.features = FeatureMatrix::Zero(study.n_slots(), study.feature_dim());
  for (int i = 0; i < study.n_slots(); ++i)
    if (mask[i]) state.features.row(i) = study.slots[i].features.transpose();
  state.steps_taken = state.acquired_count();
  return state;
}

Mask mask_from_bits(std::uint32_t bits, int n_slots) {
  Mask mask(n_slots);
  for (int i = 0; i < n_slots; ++i) mask[i] = (bits >> i) & 1u;
  return mask;
}

}  // namespace afa
