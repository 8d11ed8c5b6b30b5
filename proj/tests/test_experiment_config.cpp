#include <doctest.h>

#include "stirlab/errors.hpp"
#include "stirlab/experiment_config.hpp"

using namespace stirlab;

TEST_CASE("config parsing") {
  const auto cfg = ExperimentConfig::parse_text(
      "# study\nmodel.N = 8\nmodel.j = 1.5  # inline\nrun.snapshot_times = 0, 0.25,0.5\nrun.dense = yes\n", "t");
  CHECK(cfg.get_int("model.N") == 8);
  CHECK(cfg.get_double("model.j") == 1.5);
  CHECK(cfg.get_doubles("run.snapshot_times") == std::vector<double>{0.0, 0.25, 0.5});
  CHECK(cfg.get_bool("run.dense", false));
  CHECK(cfg.get_int("model.K", 2) == 2);
  CHECK(cfg.has("model.N"));
  CHECK_FALSE(cfg.has("model.K"));
}

TEST_CASE("config errors name the key") {
  const auto cfg = ExperimentConfig::parse_text("model.N = eight\n", "t");
  CHECK_THROWS_WITH_AS(cfg.get_int("model.K"), "missing key model.K", ConfigError);
  CHECK_THROWS_WITH_AS(cfg.get_int("model.N"), "key model.N: 'eight' is not an integer", ConfigError);
  CHECK_THROWS_AS(cfg.require_known({"model.K"}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse_text("model.N = 1\nmodel.N = 2\n", "t"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse_text("N = 1\n", "t"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse_text("model.N\n", "t"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.ini"), ConfigError);
}
