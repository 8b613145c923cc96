#include "ami/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ami/errors.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

json rate_to_json(const Rate& r) {
  json j;
  j["numerator"] = r.numerator;
  j["denominator"] = r.denominator;
  j["cumulative"] = r.cumulative();
  if (r.defined()) {
    j["value"] = r.value();
  } else {
    j["value"] = "n/a";
  }
  return j;
}

json counts_to_json(const CaseCounts& c) {
  return json{{"true_negative", c.tn},
              {"false_positive", c.fp},
              {"true_positive_restored", c.tp_restored},
              {"false_negative", c.fn},
              {"true_positive_diverted", c.tp_diverted},
              {"total", c.total()}};
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t parse_class(const std::string& field, std::size_t line_no) {
  const std::string t = trim(field);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + field +
                     "' is not a class id");
  }
  return std::stoull(t);
}

}  // namespace

std::string case_name(CaseLabel label) {
  switch (label) {
    case CaseLabel::TrueNegative: return "true_negative";
    case CaseLabel::FalsePositive: return "false_positive";
    case CaseLabel::TruePositiveRestored: return "true_positive_restored";
    case CaseLabel::FalseNegative: return "false_negative";
    case CaseLabel::TruePositiveDiverted: return "true_positive_diverted";
  }
  throw StateError("unknown case label");
}

CaseLabel classify_case(std::size_t gold, std::size_t original,
                        std::size_t attribute) {
  if (gold == original) {
    return attribute == original ? CaseLabel::TrueNegative
                                 : CaseLabel::FalsePositive;
  }
  if (attribute == gold) return CaseLabel::TruePositiveRestored;
  if (attribute == original) return CaseLabel::FalseNegative;
  return CaseLabel::TruePositiveDiverted;
}

void CaseCounts::add(CaseLabel label) {
  switch (label) {
    case CaseLabel::TrueNegative: ++tn; break;
    case CaseLabel::FalsePositive: ++fp; break;
    case CaseLabel::TruePositiveRestored: ++tp_restored; break;
    case CaseLabel::FalseNegative: ++fn; break;
    case CaseLabel::TruePositiveDiverted: ++tp_diverted; break;
  }
}

double Rate::value() const {
  if (!defined()) throw StateError("rate is undefined (0 denominator)");
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::string Rate::cumulative() const {
  const std::string frac =
      " [" + std::to_string(numerator) + "/" + std::to_string(denominator) + "]";
  if (!defined()) return "n/a" + frac;
  return format_double("%.2f", value()) + frac;
}

Rate detection_rate(const CaseCounts& c) {
  return Rate{c.tp_restored + c.tp_diverted,
              c.tp_restored + c.tp_diverted + c.fn};
}

Rate false_positive_rate(const CaseCounts& c) { return Rate{c.fp, c.fp + c.tn}; }

Rate flagged_fraction(const CaseCounts& c) {
  return Rate{c.fp + c.tp_restored + c.tp_diverted, c.total()};
}

MetricsReport aggregate(const std::vector<DetectionRecord>& records) {
  if (records.empty()) throw UsageError("no records to aggregate");
  MetricsReport report;
  for (const DetectionRecord& r : records) {
    report.counts.add(r.label);
    report.per_attack[r.attack].add(r.label);
  }
  report.detection = detection_rate(report.counts);
  report.fpr = false_positive_rate(report.counts);
  report.flagged = flagged_fraction(report.counts);
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["cases"] = counts_to_json(report.counts);
  j["detection_rate"] = rate_to_json(report.detection);
  j["false_positive_rate"] = rate_to_json(report.fpr);
  j["flagged_fraction"] = rate_to_json(report.flagged);
  json breakdown = json::object();
  for (const auto& [attack, counts] : report.per_attack) {
    const std::string key = attack.empty() ? "clean" : attack;
    json entry = counts_to_json(counts);
    entry["detection_rate"] = rate_to_json(detection_rate(counts));
    entry["false_positive_rate"] = rate_to_json(false_positive_rate(counts));
    breakdown[key] = entry;
  }
  j["per_attack"] = breakdown;
  return j.dump(2) + "\n";
}

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream out;
  const auto row = [&out](const std::string& name, const std::string& pattern,
                          std::size_t count) {
    out << name;
    out << std::string(26 - name.size(), ' ');
    out << pattern;
    out << std::string(10 - pattern.size(), ' ');
    out << count << "\n";
  };
  row("true negative", "X-X-X", report.counts.tn);
  row("false positive", "X-X-Y", report.counts.fp);
  row("true positive restored", "X-Y-X", report.counts.tp_restored);
  row("false negative", "X-Y-Y", report.counts.fn);
  row("true positive diverted", "X-Y-Z", report.counts.tp_diverted);
  row("total", "", report.counts.total());
  out << "detection rate      " << report.detection.cumulative() << "\n";
  out << "false positive rate " << report.fpr.cumulative() << "\n";
  out << "flagged fraction    " << report.flagged.cumulative() << "\n";
  for (const auto& [attack, counts] : report.per_attack) {
    const std::string key = attack.empty() ? "clean" : attack;
    out << "  " << key << ": detection " << detection_rate(counts).cumulative()
        << ", fpr " << false_positive_rate(counts).cumulative() << "\n";
  }
  return out.str();
}

DetectionRecord detect(const Network& net, const WitnessMap& map,
                       const SteeringParams& params, const Tensor& image,
                       std::size_t gold) {
  DetectionRecord rec;
  rec.gold = gold;
  rec.original = predict(net, image).label;
  rec.attribute = attribute_predict(net, map, params, image).label;
  rec.flagged = rec.original != rec.attribute;
  rec.label = classify_case(rec.gold, rec.original, rec.attribute);
  rec.source = RecordSource::Generated;
  return rec;
}

std::string records_to_csv(const std::vector<DetectionRecord>& records) {
  std::ostringstream out;
  out << "gold,original,attribute\n";
  for (const DetectionRecord& r : records) {
    out << r.gold << "," << r.original << "," << r.attribute << "\n";
  }
  return out.str();
}

std::vector<DetectionRecord> parse_triple_log(const std::string& text) {
  if (trim(text).empty()) throw UsageError("triple log is empty");
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<DetectionRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (line_no == 1) {
      if (t != "gold,original,attribute") {
        throw ParseError("line 1: expected header 'gold,original,attribute'");
      }
      continue;
    }
    if (t.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(t);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 3 comma-separated fields, got " +
                       std::to_string(fields.size()));
    }
    DetectionRecord rec;
    rec.id = records.size();
    rec.gold = parse_class(fields[0], line_no);
    rec.original = parse_class(fields[1], line_no);
    rec.attribute = parse_class(fields[2], line_no);
    rec.flagged = rec.original != rec.attribute;
    rec.label = classify_case(rec.gold, rec.original, rec.attribute);
    rec.source = RecordSource::ExternalLog;
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw UsageError("triple log has a header but no rows");
  return records;
}

std::vector<DetectionRecord> replay_log(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return parse_triple_log(std::string(b.begin(), b.end()));
}

SweepReport beta_sweep(const Network& net, const WitnessMap& map,
                       const Dataset& clean,
                       const std::vector<std::size_t>& clean_indices,
                       const AdversarialSet& adv, const std::vector<double>& betas,
                       const SteeringParams& base) {
  if (betas.empty()) throw ConfigError("beta grid is empty");
  if (clean_indices.empty() || adv.examples.empty()) {
    throw ConfigError(
        "sweep needs a mixed pool: at least one clean and one adversarial "
        "example (an adversarial-only set biases the evaluation)");
  }

  // Y never depends on beta; compute it once per input.
  std::vector<std::size_t> clean_y;
  clean_y.reserve(clean_indices.size());
  for (std::size_t idx : clean_indices) {
    if (idx >= clean.size()) {
      throw LookupError("clean index " + std::to_string(idx) + " out of range");
    }
    clean_y.push_back(predict(net, clean.images[idx]).label);
  }
  std::vector<std::size_t> adv_y;
  adv_y.reserve(adv.examples.size());
  for (const AdversarialExample& ex : adv.examples) {
    adv_y.push_back(predict(net, ex.image).label);
  }

  SweepReport report;
  report.base = base;
  for (double beta : betas) {
    SteeringParams params = base;
    params.beta = beta;
    std::vector<DetectionRecord> full;
    std::vector<DetectionRecord> success;
    std::size_t id = 0;
    for (std::size_t i = 0; i < clean_indices.size(); ++i) {
      DetectionRecord rec;
      rec.id = id++;
      rec.gold = clean.labels[clean_indices[i]];
      rec.original = clean_y[i];
      rec.attribute =
          attribute_predict(net, map, params, clean.images[clean_indices[i]]).label;
      rec.flagged = rec.original != rec.attribute;
      rec.label = classify_case(rec.gold, rec.original, rec.attribute);
      full.push_back(rec);
      success.push_back(rec);
    }
    for (std::size_t i = 0; i < adv.examples.size(); ++i) {
      const AdversarialExample& ex = adv.examples[i];
      DetectionRecord rec;
      rec.id = id++;
      rec.gold = ex.gold;
      rec.original = adv_y[i];
      rec.attribute = attribute_predict(net, map, params, ex.image).label;
      rec.flagged = rec.original != rec.attribute;
      rec.label = classify_case(rec.gold, rec.original, rec.attribute);
      rec.attack = ex.method;
      full.push_back(rec);
      if (rec.original != rec.gold) success.push_back(rec);
    }
    SweepPoint point;
    point.beta = beta;
    point.full_pool = aggregate(full);
    // A pool where every attack failed leaves only the clean records.
    point.success_only = aggregate(success);
    report.points.push_back(std::move(point));
  }
  return report;
}

std::string sweep_to_json(const SweepReport& report) {
  json j;
  j["alpha"] = report.base.alpha;
  j["epsilon"] = report.base.epsilon;
  j["weaken_mode"] = weaken_mode_name(report.base.weaken_mode);
  j["strengthen_mode"] = strengthen_mode_name(report.base.strengthen_mode);
  json points = json::array();
  for (const SweepPoint& p : report.points) {
    points.push_back(
        json{{"beta", p.beta},
             {"full_pool", json::parse(report_to_json(p.full_pool))},
             {"success_only", json::parse(report_to_json(p.success_only))}});
  }
  j["points"] = points;
  return j.dump(2) + "\n";
}

std::string sweep_to_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "beta,detection_rate,fpr,flagged_fraction\n";
  for (const SweepPoint& p : report.points) {
    const auto cell = [](const Rate& r) {
      return r.defined() ? format_double("%.12g", r.value()) : std::string("n/a");
    };
    out << format_double("%.12g", p.beta) << ","
        << cell(p.full_pool.detection) << "," << cell(p.full_pool.fpr) << ","
        << cell(p.full_pool.flagged) << "\n";
  }
  return out.str();
}

}  // namespace ami
