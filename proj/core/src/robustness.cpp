#include "imloc/robustness.hpp"

#include <cmath>
#include <stdexcept>

#include "imloc/image_io.hpp"
#include "imloc/image_ops.hpp"

namespace imloc {

std::string to_string(AttackKind k) { return k == AttackKind::jpeg ? "jpeg" : "gaussian_blur"; }

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "jpeg") return AttackKind::jpeg;
  if (s == "gaussian_blur" || s == "blur") return AttackKind::gaussian_blur;
  throw std::invalid_argument("unknown attack kind '" + s + "' (expected jpeg or gaussian_blur)");
}

AttackSpec AttackSpec::defaults(AttackKind kind) {
  if (kind == AttackKind::jpeg) return {kind, {100, 90, 80, 70, 60, 50}};
  return {kind, {0.5, 1, 2, 3, 4}};
}

void AttackSpec::validate() const {
  if (levels.empty()) throw std::invalid_argument("attack: no levels given");
  for (double l : levels) {
    if (kind == AttackKind::jpeg) {
      if (l < 1 || l > 100 || l != std::floor(l)) {
        throw std::invalid_argument("attack: JPEG quality must be an integer in [1, 100], got " + std::to_string(l));
      }
    } else if (!(l > 0) || !std::isfinite(l)) {
      throw std::invalid_argument("attack: blur sigma must be positive, got " + std::to_string(l));
    }
  }
}

Sample apply_attack(const Sample& sample, AttackKind kind, double level) {
  sample.validate();
  Sample out = sample;
  if (kind == AttackKind::jpeg) {
    out.image = jpeg_round_trip(sample.image, static_cast<int>(level));
  } else {
    out.image = gaussian_blur(sample.image, level);
  }
  return out;
}

void to_json(nlohmann::json& j, const RobustnessCurve& c) {
  j = {{"kind", to_string(c.kind)}, {"dataset", c.dataset}, {"baseline_f1", c.baseline_f1}};
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& p : c.points) {
    pts.push_back({{"level", p.level},
                   {"f1", p.dataset_f1},
                   {"auc", p.dataset_auc ? nlohmann::json(*p.dataset_auc) : nlohmann::json(nullptr)}});
  }
}

void from_json(const nlohmann::json& j, RobustnessCurve& c) {
  c.kind = parse_attack_kind(j.at("kind").get<std::string>());
  c.dataset = j.value("dataset", std::string{});
  c.baseline_f1 = j.at("baseline_f1").get<double>();
  c.points.clear();
  for (const auto& p : j.at("points")) {
    CurvePoint cp{p.at("level").get<double>(), p.at("f1").get<double>(), std::nullopt};
    if (p.contains("auc") && !p.at("auc").is_null()) cp.dataset_auc = p.at("auc").get<double>();
    c.points.push_back(cp);
  }
}

double all_positive_baseline(const SampleSet& samples) {
  if (samples.empty()) throw std::invalid_argument("all_positive_baseline: empty split");
  double sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += all_positive_f1(samples.get(i).mask);
  return sum / static_cast<double>(samples.size());
}

RobustnessCurve sweep(Model& model, const SampleSet& samples, const AttackSpec& spec) {
  spec.validate();
  RobustnessCurve curve;
  curve.kind = spec.kind;
  curve.dataset = samples.name();
  curve.baseline_f1 = all_positive_baseline(samples);
  for (double level : spec.levels) {
    const auto report =
        evaluate_dataset(model, samples, [&](const Sample& s) { return apply_attack(s, spec.kind, level); });
    curve.points.push_back({level, report.dataset_f1(), report.dataset_auc()});
  }
  return curve;
}

}  // namespace imloc
