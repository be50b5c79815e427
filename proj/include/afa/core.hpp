#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace afa {

/// Raised for any contract violation in the library (bad input files,
/// shape mismatches, invalid configs). `kind` is a short machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

inline constexpr int kNumClasses = 3;

using FeatureVector = Eigen::VectorXf;
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = std::vector<bool>;

struct ViewSlot {
  std::string view;  // e.g. "PLAX", "PSAX"
  double cost = 1.0;
  FeatureVector features;
};

/// One patient study. Slot order is canonical and never changes after load.
struct StudyRecord {
  std::string study_id;
  int label = 0;
  std::vector<ViewSlot> slots;

  int n_slots() const { return static_cast<int>(slots.size()); }
  int feature_dim() const { return slots.empty() ? 0 : static_cast<int>(slots.front().features.size()); }
};

/// MDP state: row i of `features` is mask[i] * f(x_i).
struct AcquisitionState {
  Mask mask;
  FeatureMatrix features;
  int steps_taken = 0;
  bool terminal = false;

  int n_slots() const { return static_cast<int>(mask.size()); }
  int acquired_count() const;
  std::uint32_t mask_bits() const;

  bool operator==(const AcquisitionState& other) const;
};

/// Terminate, or Acquire(slot). The flat action index puts Terminate at 0
/// and Acquire(i) at i + 1, matching the Q-vector layout.
class Action {
 public:
  static Action terminate() { return Action(-1); }
  static Action acquire(int slot);
  static Action from_index(int index, int n_slots);

  bool is_terminate() const { return slot_ < 0; }
  int slot() const;
  int index() const { return slot_ + 1; }

  bool operator==(const Action&) const = default;

 private:
  explicit Action(int slot) : slot_(slot) {}
  int slot_;
};

struct DatasetSummary {
  std::size_t n_studies = 0;
  int n_slots = 0;
  int feature_dim = 0;
  std::map<int, std::size_t> class_counts;
};

struct Dataset {
  std::vector<StudyRecord> studies;
  DatasetSummary summary;
};

/// `expected_d` <= 0 means infer D from the first study.
Dataset load_dataset(const std::filesystem::path& path, int expected_n = 4, int expected_d = 0);
void write_dataset(const std::filesystem::path& path, const std::vector<StudyRecord>& studies);

/// Serialize one study as a single JSON line (no trailing newline).
std::string study_to_json_line(const StudyRecord& study);
StudyRecord study_from_json_line(const std::string& line);

DatasetSummary summarize(const std::vector<StudyRecord>& studies);
void validate_study(const StudyRecord& study, int expected_n, int expected_d);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<StudyRecord> train;
  std::vector<StudyRecord> val;
  std::vector<StudyRecord> test;
};

/// Shuffled study-level partition. Val and test get floor(fraction * n),
/// train takes the remainder.
Splits split_dataset(const std::vector<StudyRecord>& studies, SplitFractions fractions, std::uint64_t seed);

AcquisitionState apply_mask(const StudyRecord& study, const Mask& mask);

Mask mask_from_bits(std::uint32_t bits, int n_slots);

/// Display names per slot: view tag plus 1-based occurrence within that view
/// ("PLAX_1", "PLAX_2", ...).
std::vector<std::string> slot_names(const StudyRecord& study);

/// Default view scheme: [PLAX, PLAX, PSAX, PSAX].
std::vector<std::string> default_view_scheme();

}  // namespace afa
