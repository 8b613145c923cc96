#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "ami/attacks.hpp"
#include "ami/errors.hpp"
#include "ami/model.hpp"
#include "fixture.hpp"

using namespace ami;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

double euclid(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool in_unit_box(const Tensor& t) {
  for (double v : t.data) {
    if (v < 0.0 || v > 1.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("single-step bim reproduces fgsm bitwise") {
  const auto& fx = labtest::lab();
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor& img = fx.holdout.images[i];
    const std::size_t gold = fx.holdout.labels[i];
    const AdversarialExample a = fgsm(fx.model.net, img, gold, 0.1);
    const AdversarialExample b = bim(fx.model.net, img, gold, 0.1, 1, 0.1);
    CHECK(a.image.data == b.image.data);
    CHECK(a.label == b.label);
    CHECK(a.linf == b.linf);
    CHECK(a.l2 == b.l2);
    CHECK(a.success == b.success);
  }
}

TEST_CASE("fgsm respects the budget and the pixel box") {
  const auto& fx = labtest::lab();
  const double eps = 0.07;
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor& img = fx.holdout.images[i];
    const AdversarialExample ex =
        fgsm(fx.model.net, img, fx.holdout.labels[i], eps);
    CHECK(max_abs_diff(ex.image, img) <= eps + 1e-12);
    CHECK(in_unit_box(ex.image));
    CHECK(ex.linf == doctest::Approx(max_abs_diff(ex.image, img)).epsilon(1e-12));
  }
}

TEST_CASE("bim stays inside the ball across steps") {
  const auto& fx = labtest::lab();
  const double eps = 0.1;
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor& img = fx.holdout.images[i];
    const AdversarialExample ex =
        bim(fx.model.net, img, fx.holdout.labels[i], eps, 8, 0.02);
    CHECK(max_abs_diff(ex.image, img) <= eps + 1e-12);
    CHECK(in_unit_box(ex.image));
    CHECK(ex.iterations <= 8);
  }
}

TEST_CASE("run_attack orders examples and reports verified metadata") {
  const auto& fx = labtest::lab();
  AttackConfig cfg;
  cfg.method = "bim";
  cfg.epsilon = 0.15;
  cfg.steps = 6;
  cfg.step_size = 0.03;
  const std::vector<std::size_t> indices{3, 0, 5, 1};
  const AdversarialSet set = run_attack(fx.model.net, fx.holdout, indices, cfg);
  REQUIRE(set.examples.size() == indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const AdversarialExample& ex = set.examples[i];
    const Tensor& src = fx.holdout.images[indices[i]];
    CHECK(ex.index == indices[i]);
    CHECK(ex.gold == fx.holdout.labels[indices[i]]);
    CHECK(ex.linf == doctest::Approx(max_abs_diff(ex.image, src)).epsilon(1e-12));
    CHECK(ex.l2 == doctest::Approx(euclid(ex.image, src)).epsilon(1e-12));
    const std::size_t label = predict(fx.model.net, ex.image).label;
    CHECK(ex.label == label);
    CHECK(ex.success == (label != ex.gold));
    CHECK(set.data.images[i].data == ex.image.data);
    CHECK(set.data.labels[i] == ex.gold);
  }
}

TEST_CASE("threaded run_attack matches the serial result bitwise") {
  const auto& fx = labtest::lab();
  AttackConfig cfg;
  cfg.method = "cw";
  cfg.cw.search_rounds = 2;
  cfg.cw.iterations = 20;
  const std::vector<std::size_t> indices{0, 1, 2, 3, 4};
  const AdversarialSet serial = run_attack(fx.model.net, fx.holdout, indices, cfg, 1);
  const AdversarialSet pooled = run_attack(fx.model.net, fx.holdout, indices, cfg, 3);
  CHECK(adversarial_to_bytes(serial) == adversarial_to_bytes(pooled));
}

TEST_CASE("cw is deterministic under its seed and verifies success") {
  const auto& fx = labtest::lab();
  CwConfig cw;
  cw.search_rounds = 3;
  cw.iterations = 40;
  cw.seed = 77;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor& img = fx.holdout.images[i];
    const std::size_t gold = fx.holdout.labels[i];
    const AdversarialExample a = cw_l2(fx.model.net, img, gold, cw);
    const AdversarialExample b = cw_l2(fx.model.net, img, gold, cw);
    CHECK(a.image.data == b.image.data);
    CHECK(a.success == b.success);
    CHECK(in_unit_box(a.image));
    if (a.success) {
      CHECK(predict(fx.model.net, a.image).label != gold);
      CHECK(a.l2 > 0.0);
    }
  }
}

TEST_CASE("patch never touches pixels outside the mask") {
  const auto& fx = labtest::lab();
  PatchMask mask;  // rows 6..9, cols 6..9
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor& img = fx.holdout.images[i];
    const std::size_t gold = fx.holdout.labels[i];
    const std::size_t target = (gold + 1) % fx.data.num_classes;
    const AdversarialExample ex =
        patch(fx.model.net, img, gold, mask, target, 40, 0.05);
    CHECK(ex.targeted);
    CHECK(ex.target == target);
    for (std::size_t r = 0; r < fx.data.height; ++r) {
      for (std::size_t c = 0; c < fx.data.width; ++c) {
        const bool inside = r >= mask.row && r < mask.row + mask.height &&
                            c >= mask.col && c < mask.col + mask.width;
        if (!inside) {
          CHECK(ex.image.at(0, r, c) == img.at(0, r, c));
        } else {
          CHECK(ex.image.at(0, r, c) >= 0.0);
          CHECK(ex.image.at(0, r, c) <= 1.0);
        }
      }
    }
    if (ex.success) {
      CHECK(predict(fx.model.net, ex.image).label == target);
    }
  }
}

TEST_CASE("patch rejects masks that leave the image") {
  const auto& fx = labtest::lab();
  PatchMask mask;
  mask.row = 14;
  mask.height = 4;
  CHECK_THROWS_AS(patch(fx.model.net, fx.holdout.images[0], fx.holdout.labels[0],
                        mask, 0, 5, 0.05),
                  ConfigError);
}

TEST_CASE("pick_target ranks non-gold classes by clean logit") {
  const Tensor logits({4}, {0.1, 0.9, 0.5, 0.2});
  CHECK(pick_target(logits, 1, "first", 4) == 2);
  CHECK(pick_target(logits, 1, "next", 4) == 3);
  CHECK(pick_target(logits, 1, "2", 4) == 2);
  CHECK_THROWS_AS(pick_target(logits, 1, "9", 4), ConfigError);
  CHECK_THROWS_AS(pick_target(logits, 1, "soon", 4), ConfigError);
  const Tensor two({2}, {0.3, 0.7});
  CHECK_THROWS_AS(pick_target(two, 0, "next", 2), ConfigError);
}

TEST_CASE("attack config validation rejects bad combinations") {
  AttackConfig cfg;
  cfg.method = "pgd";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "bim";
  cfg.step_size = cfg.epsilon * 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "bim";
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "cw";
  cfg.cw.initial_c = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "cw";
  cfg.cw.kappa = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "patch";
  cfg.target = "first";
  cfg.mask.height = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.method = "patch";  // defaults to untargeted
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = AttackConfig{};
  cfg.target = "first";  // fgsm takes no target
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("adversarial sets survive the byte round trip") {
  const auto& fx = labtest::lab();
  AttackConfig cfg;
  cfg.method = "fgsm";
  cfg.epsilon = 0.12;
  const AdversarialSet set =
      run_attack(fx.model.net, fx.holdout, {0, 1, 2}, cfg);
  const Bytes bytes = adversarial_to_bytes(set);
  const AdversarialSet back = adversarial_from_bytes(bytes);
  REQUIRE(back.examples.size() == set.examples.size());
  CHECK(back.config.method == "fgsm");
  CHECK(back.config.epsilon == 0.12);
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    CHECK(back.examples[i].index == set.examples[i].index);
    CHECK(back.examples[i].gold == set.examples[i].gold);
    CHECK(back.examples[i].label == set.examples[i].label);
    CHECK(back.examples[i].linf == set.examples[i].linf);
    CHECK(back.examples[i].l2 == set.examples[i].l2);
    CHECK(back.examples[i].success == set.examples[i].success);
    CHECK(back.examples[i].image.data == set.examples[i].image.data);
  }
  // A bare dataset without the attack trailer is not an adversarial set.
  const Bytes bare = dataset_to_bytes(set.data, "");
  CHECK_THROWS_AS(adversarial_from_bytes(bare), ParseError);
}
