#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ami/attacks.hpp"
#include "ami/steering.hpp"

namespace ami {

// The five outcomes of a (gold X, original Y, attribute Z) triple. Benign
// means X == Y; the detector flags when Y != Z.
enum class CaseLabel {
  TrueNegative,          // X-X-X
  FalsePositive,         // X-X-Y
  TruePositiveRestored,  // X-Y-X
  FalseNegative,         // X-Y-Y
  TruePositiveDiverted,  // X-Y-Z, all distinct
};

std::string case_name(CaseLabel label);

CaseLabel classify_case(std::size_t gold, std::size_t original,
                        std::size_t attribute);

enum class RecordSource { Generated, ExternalLog };

struct DetectionRecord {
  std::size_t id = 0;
  std::size_t gold = 0;
  std::size_t original = 0;
  std::size_t attribute = 0;
  bool flagged = false;
  CaseLabel label = CaseLabel::TrueNegative;
  RecordSource source = RecordSource::Generated;
  std::string attack;  // empty for benign inputs
};

struct CaseCounts {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t tp_restored = 0;
  std::size_t fn = 0;
  std::size_t tp_diverted = 0;

  std::size_t total() const { return tn + fp + tp_restored + fn + tp_diverted; }
  void add(CaseLabel label);
};

// Exact ratio; an undefined rate (0 denominator) never collapses to 0.
struct Rate {
  std::size_t numerator = 0;
  std::size_t denominator = 0;

  bool defined() const { return denominator != 0; }
  double value() const;            // throws StateError when undefined
  std::string cumulative() const;  // "0.77 [10/13]", or "n/a [0/0]"
};

Rate detection_rate(const CaseCounts& c);       // (TPr+TPd)/(TPr+TPd+FN)
Rate false_positive_rate(const CaseCounts& c);  // FP/(FP+TN)
Rate flagged_fraction(const CaseCounts& c);     // (FP+TPr+TPd)/total

struct MetricsReport {
  CaseCounts counts;
  Rate detection;
  Rate fpr;
  Rate flagged;
  std::map<std::string, CaseCounts> per_attack;  // "" key rendered as "clean"
};

// Empty input is a usage error; otherwise permutation-invariant.
MetricsReport aggregate(const std::vector<DetectionRecord>& records);

std::string report_to_json(const MetricsReport& report);
// Aligned case table plus the three rates.
std::string report_to_text(const MetricsReport& report);

// Runs the detector: Y from the original model, Z from the steered one.
DetectionRecord detect(const Network& net, const WitnessMap& map,
                       const SteeringParams& params, const Tensor& image,
                       std::size_t gold);

// Triple log: header `gold,original,attribute`, one integer triple per line.
std::string records_to_csv(const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> parse_triple_log(const std::string& text);
std::vector<DetectionRecord> replay_log(const std::filesystem::path& path);

// One sweep point carries both views: every record, and the pool restricted
// to attacks that actually fooled the original model (clean records stay in
// both). The two are never merged.
struct SweepPoint {
  double beta = 0.0;
  MetricsReport full_pool;
  MetricsReport success_only;
};

struct SweepReport {
  SteeringParams base;  // beta field unused
  std::vector<SweepPoint> points;
};

// Detects every clean index and every adversarial example at each beta in
// the grid. Requires a genuinely mixed pool: at least one clean and one
// adversarial input.
SweepReport beta_sweep(const Network& net, const WitnessMap& map,
                       const Dataset& clean,
                       const std::vector<std::size_t>& clean_indices,
                       const AdversarialSet& adv, const std::vector<double>& betas,
                       const SteeringParams& base);

std::string sweep_to_json(const SweepReport& report);
// Full-pool view: beta,detection_rate,fpr,flagged_fraction per row.
std::string sweep_to_csv(const SweepReport& report);

}  // namespace ami
