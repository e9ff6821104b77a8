#include <doctest.h>

#include <cmath>

#include "gearformer/error.hpp"
#include "gearformer/model/dataset.hpp"
#include "gearformer/model/trainer.hpp"

using namespace gearformer;
using namespace gearformer::model;

namespace {

const Grammar& grammar() {
  static const Grammar g(default_catalog());
  return g;
}

TrainConfig small_config() {
  TrainConfig c;
  c.hp.d_model = 32;
  c.hp.heads = 4;
  c.hp.encoder_layers = 1;
  c.hp.decoder_layers = 2;
  c.hp.memory_slots = 2;
  c.batch_size = 16;
  c.warmup_steps = 5;
  c.learning_rate = 3e-3;
  return c;
}

}  // namespace

TEST_CASE("memorizes a ten-example dataset") {
  const auto data = generate_dataset(grammar(), 10, 31);
  TrainConfig c = small_config();
  c.epochs = 300;
  const auto result = train(grammar(), data, c);
  REQUIRE(result.curve.size() == 300);
  MESSAGE("first " << result.curve.front().masked_ce << " last " << result.curve.back().masked_ce);
  CHECK(result.curve.back().masked_ce < 0.05);
}

TEST_CASE("same seed and data give a bitwise identical run") {
  const auto data = generate_dataset(grammar(), 60, 2);
  TrainConfig c = small_config();
  c.epochs = 2;
  c.validity_weight = 0.2;
  const auto a = train(grammar(), data, c);
  const auto b = train(grammar(), data, c);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].masked_ce == b.curve[i].masked_ce);
    CHECK(a.curve[i].validity == b.curve[i].validity);
  }
  CHECK(save_params(a.model) == save_params(b.model));

  c.seed = 2;
  const auto other = train(grammar(), data, c);
  CHECK(save_params(other.model) != save_params(a.model));
}

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.warmup_steps = 10;
  c.final_lr_fraction = 0.1;
  CHECK(learning_rate_at(c, 0, 110) == doctest::Approx(1e-4));
  CHECK(learning_rate_at(c, 9, 110) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(c, 10, 110) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(c, 60, 110) == doctest::Approx(0.55e-3));
  CHECK(learning_rate_at(c, 110, 110) == doctest::Approx(1e-4));
  double prev = 1.0;
  for (int s = 10; s <= 110; ++s) {
    const double lr = learning_rate_at(c, s, 110);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("config file keys") {
  const TrainConfig c = train_config_from_json(
      Json::parse(R"({"layers": 2, "d_model": 64, "epochs": 3, "seed": 7, "learning_rate": 0.01})"));
  CHECK(c.hp.encoder_layers == 2);
  CHECK(c.hp.decoder_layers == 2);
  CHECK(c.hp.d_model == 64);
  CHECK(c.epochs == 3);
  CHECK(c.seed == 7);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.batch_size == TrainConfig{}.batch_size);

  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  CHECK(back.hp == c.hp);
  CHECK(back.epochs == c.epochs);
  CHECK(back.validity_weight == c.validity_weight);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"epochs": 0})")), Error);
  CHECK_THROWS_AS(train_config_from_json(Json::parse(R"({"d_model": "big"})")), Error);
}

TEST_CASE("bundled training config matches the built-in defaults") {
  const TrainConfig file =
      train_config_from_json(Json::parse(read_text_file(GEARFORMER_SOURCE_DIR "/configs/train.json")));
  const TrainConfig defaults;
  CHECK(train_config_to_json(file) == train_config_to_json(defaults));
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train(grammar(), {}, small_config()), Error);
  const auto data = generate_dataset(grammar(), 20, 5);
  TrainConfig c = small_config();
  c.epochs = 3;
  c.learning_rate = 1e30;
  c.warmup_steps = 1;
  c.grad_clip = 1e30;
  try {
    train(grammar(), data, c);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInternal);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("unmasked validity diagnostic counts rollouts") {
  const auto& g = grammar();
  const Model m(small_config().hp, g.vocabulary().size(), 1, g.catalog().version());
  std::vector<Requirements> reqs(25);
  for (int i = 0; i < 25; ++i) reqs[i].target_ratio = 1.0 + i;
  const auto v = unmasked_greedy_validity(m, g, reqs);
  CHECK(v.rollouts == 25);
  CHECK(v.valid_rollouts <= v.rollouts);
  CHECK(v.valid_tokens <= v.tokens);
  CHECK(v.tokens >= v.rollouts);
  CHECK(v.token_rate() >= 0.0);
  CHECK(v.token_rate() <= 1.0);
}
