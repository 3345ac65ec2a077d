#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "imloc/evaluate.hpp"

namespace imloc {

enum class AttackKind { jpeg, gaussian_blur };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::jpeg;
  std::vector<double> levels;  // JPEG quality in [1, 100] or blur sigma > 0

  /// JPEG {100, 90, 80, 70, 60, 50}; blur sigma {0.5, 1, 2, 3, 4}.
  static AttackSpec defaults(AttackKind kind);
  /// Throws std::invalid_argument for an empty or out-of-range level list.
  void validate() const;
};

/// Degrades the image only; the mask is returned untouched.
Sample apply_attack(const Sample& sample, AttackKind kind, double level);

struct CurvePoint {
  double level = 0;
  double dataset_f1 = 0;
  std::optional<double> dataset_auc;
};

struct RobustnessCurve {
  AttackKind kind = AttackKind::jpeg;
  std::string dataset;
  std::vector<CurvePoint> points;
  double baseline_f1 = 0;  // all-positive prediction, from ground truth only
};

void to_json(nlohmann::json& j, const RobustnessCurve& c);
void from_json(const nlohmann::json& j, RobustnessCurve& c);

/// Mean over the split of the all-positive F1.
double all_positive_baseline(const SampleSet& samples);

RobustnessCurve sweep(Model& model, const SampleSet& samples, const AttackSpec& spec);

}  // namespace imloc
