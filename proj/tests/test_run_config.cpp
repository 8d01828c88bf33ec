#include "doctest.h"
#include "factsum/run_config.hpp"

using namespace factsum;

TEST_CASE("run config defaults match the typed defaults") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  const TrainConfig t = c.train();
  const TrainConfig d;
  CHECK(t.learning_rate == d.learning_rate);
  CHECK(t.batch_size == d.batch_size);
  CHECK(t.patience_steps == d.patience_steps);
  CHECK(t.max_decays == d.max_decays);
  const RewardWeights w = c.reward();
  CHECK(w.lambda1 == 0.97);
  CHECK(w.lambda3 == 0.03);
  const CorpusConfig cc = c.corpus();
  CHECK(cc.prevalence == CorpusConfig{}.prevalence);
  CHECK(c.model(50).encoder_hidden == 64);
}

TEST_CASE("overrides take precedence over the config file") {
  RunConfig c;
  c.merge_text("# comment\n\ntrain.batch_size = 8\nseed=4\n");
  c.set(std::string_view("seed=9"));
  CHECK(c.train().batch_size == 8);
  CHECK(c.seed() == 9);
  CHECK(c.train().seed == 9);
  CHECK(c.format().find("train.batch_size=8\n") != std::string::npos);
  RunConfig again;
  again.merge_text(c.format());
  CHECK(again.format() == c.format());
}

TEST_CASE("invalid configuration is rejected") {
  RunConfig c;
  CHECK_THROWS_AS(c.set(std::string_view("train.unknown=1")), ConfigError);
  CHECK_THROWS_AS(c.set(std::string_view("no equals sign")), ConfigError);
  CHECK_THROWS_AS(c.merge_text("seed=1\nbogus=2\n", "x.cfg"), ConfigError);
  try {
    c.merge_text("seed=1\nbogus=2\n", "x.cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
  c.set("train.batch_size", "many");
  CHECK_THROWS_AS(c.train(), ConfigError);
  RunConfig r;
  r.set("reward.lambda1", "0");
  r.set("reward.lambda2", "0");
  r.set("reward.lambda3", "0");
  CHECK_THROWS_AS(r.validate(), ConfigError);
  CHECK_THROWS_AS(r.merge_file("/nonexistent/run.cfg"), ConfigError);
}
