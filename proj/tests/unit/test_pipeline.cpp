#include <doctest.h>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ami/errors.hpp"
#include "ami/pipeline.hpp"
#include "ami/serial.hpp"

using namespace ami;

namespace {

// Small enough to train in a couple of seconds, large enough that the
// holdout keeps two examples per class.
PipelineConfig tiny_config() {
  PipelineConfig c;
  c.dataset.per_class = 10;
  c.dataset.noise_sigma = 0.2;
  c.train.epochs = 2;
  c.witness.sample_count = 12;
  c.witness.randomizations = 2;
  c.attack.method = "fgsm";
  c.attack_count = 4;
  return c;
}

std::filesystem::path scratch_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / "ami_pipeline_test" / leaf;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("pipeline config survives the json round trip") {
  PipelineConfig c = tiny_config();
  c.dataset.seed = 321;
  c.train.learning_rate = 0.011;
  c.train_fraction = 0.7;
  c.steering.beta = 12.5;
  c.attack.epsilon = 0.09;
  const PipelineConfig back = pipeline_config_from_json(pipeline_config_to_json(c));
  CHECK(back.dataset.per_class == c.dataset.per_class);
  CHECK(back.dataset.seed == 321);
  CHECK(back.train.epochs == c.train.epochs);
  CHECK(back.train.learning_rate == 0.011);
  CHECK(back.train_fraction == 0.7);
  CHECK(back.steering.beta == 12.5);
  CHECK(back.witness.sample_count == 12);
  CHECK(back.attack.method == "fgsm");
  CHECK(back.attack.epsilon == 0.09);
  CHECK(back.attack_count == 4);
}

TEST_CASE("an empty json object means the default config") {
  const PipelineConfig defaults;
  const PipelineConfig parsed = pipeline_config_from_json("{}");
  CHECK(parsed.dataset.per_class == defaults.dataset.per_class);
  CHECK(parsed.train.epochs == defaults.train.epochs);
  CHECK(parsed.train_fraction == defaults.train_fraction);
  CHECK(parsed.steering.beta == defaults.steering.beta);
  CHECK(parsed.attack_count == defaults.attack_count);
}

TEST_CASE("malformed or invalid configs are rejected") {
  CHECK_THROWS_AS(pipeline_config_from_json("{not json"), ParseError);

  PipelineConfig c = tiny_config();
  c.train_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = tiny_config();
  c.attack_count = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("the pipeline emits its artifacts in a fixed order") {
  const auto dir = scratch_dir("emit");
  const PipelineResult result = run_pipeline(tiny_config(), dir);

  const std::vector<std::string> expected{"dataset.amld", "model.amlm",
                                          "witness.json", "adv.amld",
                                          "records.csv",  "metrics.json"};
  REQUIRE(result.artifacts.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(result.artifacts[i].first == expected[i]);
    // The reported digest is the digest of the file on disk.
    const Bytes bytes = read_file(dir / expected[i]);
    CHECK(result.artifacts[i].second == digest_hex(bytes));
  }

  // 80 examples at 0.8 leave 16 holdout records plus 4 adversarial ones.
  CHECK(result.record_count == 20);
  CHECK(result.report.counts.total() == 20);
  CHECK(result.train_accuracy >= 0.0);
  CHECK(result.train_accuracy <= 1.0);
  CHECK(result.holdout_accuracy >= 0.0);
  CHECK(result.holdout_accuracy <= 1.0);

  // Same config, fresh directory: bitwise identical artifacts.
  const PipelineResult again = run_pipeline(tiny_config(), scratch_dir("emit2"));
  CHECK(again.artifacts == result.artifacts);
}

TEST_CASE("the attack budget cannot exceed the holdout") {
  PipelineConfig c = tiny_config();
  c.attack_count = 17;  // holdout is 16
  CHECK_THROWS_AS(run_pipeline(c, scratch_dir("overdraw")), ConfigError);
}

TEST_CASE("determinism check passes on a fixed seed and fails a reseeded control") {
  CHECK_THROWS_AS(determinism_check(tiny_config(), 1, scratch_dir("shallow")),
                  ConfigError);

  const DeterminismResult ok =
      determinism_check(tiny_config(), 2, scratch_dir("det"));
  CHECK(ok.passed);
  CHECK(ok.first_divergent.empty());
  REQUIRE(ok.runs.size() == 2);
  CHECK(ok.runs[0] == ok.runs[1]);

  const DeterminismResult control =
      determinism_check(tiny_config(), 2, scratch_dir("control"), true);
  CHECK_FALSE(control.passed);
  CHECK(control.first_divergent == "dataset.amld");
}
