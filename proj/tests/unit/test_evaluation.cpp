#include <doctest.h>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "ami/errors.hpp"
#include "ami/evaluation.hpp"
#include "fixture.hpp"

using namespace ami;

namespace {

DetectionRecord triple(std::size_t gold, std::size_t original,
                       std::size_t attribute, const std::string& attack = "") {
  DetectionRecord rec;
  rec.gold = gold;
  rec.original = original;
  rec.attribute = attribute;
  rec.flagged = original != attribute;
  rec.label = classify_case(gold, original, attribute);
  rec.attack = attack;
  return rec;
}

}  // namespace

TEST_CASE("classify_case maps each triple pattern to its outcome") {
  CHECK(classify_case(4, 4, 4) == CaseLabel::TrueNegative);
  CHECK(classify_case(4, 4, 7) == CaseLabel::FalsePositive);
  CHECK(classify_case(4, 7, 4) == CaseLabel::TruePositiveRestored);
  CHECK(classify_case(4, 7, 7) == CaseLabel::FalseNegative);
  CHECK(classify_case(4, 7, 2) == CaseLabel::TruePositiveDiverted);
}

TEST_CASE("case names are stable identifiers") {
  CHECK(case_name(CaseLabel::TrueNegative) == "true_negative");
  CHECK(case_name(CaseLabel::FalsePositive) == "false_positive");
  CHECK(case_name(CaseLabel::TruePositiveRestored) == "true_positive_restored");
  CHECK(case_name(CaseLabel::FalseNegative) == "false_negative");
  CHECK(case_name(CaseLabel::TruePositiveDiverted) == "true_positive_diverted");
}

TEST_CASE("rates render exact fractions and refuse undefined values") {
  const Rate r{10, 13};
  CHECK(r.value() == doctest::Approx(10.0 / 13.0).epsilon(1e-15));
  CHECK(r.cumulative() == "0.77 [10/13]");
  CHECK(Rate{3, 3}.cumulative() == "1.00 [3/3]");
  CHECK(Rate{0, 3}.cumulative() == "0.00 [0/3]");
  const Rate undefined{0, 0};
  CHECK_FALSE(undefined.defined());
  CHECK(undefined.cumulative() == "n/a [0/0]");
  CHECK_THROWS_AS(undefined.value(), StateError);
}

TEST_CASE("aggregate counts cases and derives the three rates") {
  std::vector<DetectionRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(triple(0, 0, 0));
  records.push_back(triple(0, 0, 1));
  records.push_back(triple(0, 1, 0, "fgsm"));
  records.push_back(triple(0, 1, 1, "fgsm"));
  records.push_back(triple(0, 1, 2, "fgsm"));

  const MetricsReport report = aggregate(records);
  CHECK(report.counts.tn == 5);
  CHECK(report.counts.fp == 1);
  CHECK(report.counts.tp_restored == 1);
  CHECK(report.counts.fn == 1);
  CHECK(report.counts.tp_diverted == 1);
  CHECK(report.counts.total() == 9);
  CHECK(report.detection.cumulative() == "0.67 [2/3]");
  CHECK(report.fpr.cumulative() == "0.17 [1/6]");
  CHECK(report.flagged.cumulative() == "0.33 [3/9]");
  REQUIRE(report.per_attack.count(""));
  REQUIRE(report.per_attack.count("fgsm"));
  CHECK(report.per_attack.at("").total() == 6);
  CHECK(report.per_attack.at("fgsm").total() == 3);

  // Order of the records cannot matter.
  std::reverse(records.begin(), records.end());
  const MetricsReport reversed = aggregate(records);
  CHECK(report_to_json(reversed) == report_to_json(report));

  CHECK_THROWS_AS(aggregate({}), UsageError);
}

TEST_CASE("report renderers expose undefined rates as n/a") {
  const MetricsReport report = aggregate({triple(2, 2, 2)});
  const std::string js = report_to_json(report);
  CHECK(js.find("\"value\": \"n/a\"") != std::string::npos);
  CHECK(js.find("\"clean\"") != std::string::npos);
  const std::string text = report_to_text(report);
  CHECK(text.find("true negative") != std::string::npos);
  CHECK(text.find("detection rate      n/a [0/0]") != std::string::npos);
  CHECK(text.find("flagged fraction    0.00 [0/1]") != std::string::npos);
  CHECK(text.find("clean: detection") != std::string::npos);
}

TEST_CASE("triple logs round-trip through csv") {
  const std::vector<DetectionRecord> records{
      triple(202, 1674, 1484), triple(1997, 32, 31), triple(441, 416, 70)};
  const std::string csv = records_to_csv(records);
  CHECK(csv.substr(0, 24) == "gold,original,attribute\n");
  const std::vector<DetectionRecord> back = parse_triple_log(csv);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].id == i);
    CHECK(back[i].gold == records[i].gold);
    CHECK(back[i].original == records[i].original);
    CHECK(back[i].attribute == records[i].attribute);
    CHECK(back[i].flagged == records[i].flagged);
    CHECK(back[i].label == records[i].label);
    CHECK(back[i].source == RecordSource::ExternalLog);
  }
}

TEST_CASE("triple log parsing rejects malformed input precisely") {
  CHECK_THROWS_AS(parse_triple_log(""), UsageError);
  CHECK_THROWS_AS(parse_triple_log("gold,original,attribute\n"), UsageError);
  CHECK_THROWS_WITH_AS(parse_triple_log("a,b,c\n1,2,3\n"),
                       "line 1: expected header 'gold,original,attribute'",
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_triple_log("gold,original,attribute\n1,2\n"),
                       "line 2: expected 3 comma-separated fields, got 2",
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_triple_log("gold,original,attribute\n1,2,x\n"),
                       "line 2: 'x' is not a class id", ParseError);

  // Blank lines and surrounding whitespace are tolerated.
  const auto records =
      parse_triple_log("gold,original,attribute\n\n 1 , 2 , 3 \n\n");
  REQUIRE(records.size() == 1);
  CHECK(records[0].gold == 1);
  CHECK(records[0].attribute == 3);
}

TEST_CASE("detect fills a coherent record") {
  const auto& fx = labtest::lab();
  SteeringParams params;
  for (std::size_t i = 0; i < 4; ++i) {
    const DetectionRecord rec = detect(fx.model.net, fx.map, params,
                                       fx.holdout.images[i], fx.holdout.labels[i]);
    CHECK(rec.gold == fx.holdout.labels[i]);
    CHECK(rec.original == predict(fx.model.net, fx.holdout.images[i]).label);
    CHECK(rec.flagged == (rec.original != rec.attribute));
    CHECK(rec.label == classify_case(rec.gold, rec.original, rec.attribute));
    CHECK(rec.source == RecordSource::Generated);
    CHECK(rec.attack.empty());
  }
}

TEST_CASE("beta sweep keeps full and success-filtered views separate") {
  const auto& fx = labtest::lab();
  // A tiny budget leaves most attacks unsuccessful, so the views differ.
  AttackConfig cfg;
  cfg.method = "fgsm";
  cfg.epsilon = 0.004;
  const std::vector<std::size_t> adv_indices{0, 1, 2, 3, 4, 5, 6, 7};
  const AdversarialSet adv =
      run_attack(fx.model.net, fx.holdout, adv_indices, cfg);

  const std::vector<std::size_t> clean_indices{8, 9, 10, 11};
  SteeringParams base;
  const SweepReport report = beta_sweep(fx.model.net, fx.map, fx.holdout,
                                        clean_indices, adv, {5.0, 60.0}, base);
  REQUIRE(report.points.size() == 2);
  std::size_t fooled = 0;
  for (const AdversarialExample& ex : adv.examples) {
    if (predict(fx.model.net, ex.image).label != ex.gold) ++fooled;
  }
  for (const SweepPoint& point : report.points) {
    CHECK(point.full_pool.counts.total() ==
          clean_indices.size() + adv.examples.size());
    CHECK(point.success_only.counts.total() == clean_indices.size() + fooled);
    CHECK(point.full_pool.per_attack.count("fgsm"));
    CHECK(point.full_pool.per_attack.count(""));
  }
  CHECK(report.points[0].beta == 5.0);
  CHECK(report.points[1].beta == 60.0);

  const std::string csv = sweep_to_csv(report);
  CHECK(csv.rfind("beta,detection_rate,fpr,flagged_fraction\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const std::string js = sweep_to_json(report);
  CHECK(js.find("\"full_pool\"") != std::string::npos);
  CHECK(js.find("\"success_only\"") != std::string::npos);
}

TEST_CASE("beta sweep refuses unmixed pools and bad indices") {
  const auto& fx = labtest::lab();
  AttackConfig cfg;
  cfg.method = "fgsm";
  const AdversarialSet adv = run_attack(fx.model.net, fx.holdout, {0}, cfg);
  SteeringParams base;
  AdversarialSet empty = adv;
  empty.examples.clear();
  CHECK_THROWS_AS(
      beta_sweep(fx.model.net, fx.map, fx.holdout, {1}, empty, {5.0}, base),
      ConfigError);
  CHECK_THROWS_AS(
      beta_sweep(fx.model.net, fx.map, fx.holdout, {}, adv, {5.0}, base),
      ConfigError);
  CHECK_THROWS_AS(
      beta_sweep(fx.model.net, fx.map, fx.holdout, {1}, adv, {}, base),
      ConfigError);
  CHECK_THROWS_AS(beta_sweep(fx.model.net, fx.map, fx.holdout, {999}, adv,
                             {5.0}, base),
                  LookupError);
}
