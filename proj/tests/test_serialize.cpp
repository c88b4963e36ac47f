#include "ren/config.hpp"
#include "ren/errors.hpp"
#include "ren/param.hpp"
#include "ren/serialize.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ren;

TEST_CASE("model JSON round trip is bit-exact") {
  std::mt19937_64 rng(1);
  const std::string path = (std::filesystem::temp_directory_path() / "ren_test_model.json").string();
  for (ModelKind kind : {ModelKind::kCAren, ModelKind::kCRen, ModelKind::kRAren, ModelKind::kRRen}) {
    param::InitOptions io;
    io.activation = Activation::kSigmoid;
    io.alpha_bar = 0.7;
    const DirectParams t = param::sample_params(kind, {3, 2, 2, 4}, rng, io);
    const std::optional<IqcSpec> iqc =
        is_robust(kind) ? std::optional(IqcSpec::output_passive(0.3, 2)) : std::nullopt;
    const ExplicitModel m = param::construct(t, iqc);
    save_model(path, m);
    const ExplicitModel r = load_model(path);
    CHECK(bit_equal(m, r));
    REQUIRE(r.params);
    CHECK(bit_equal(*m.params, *r.params));
    CHECK(bit_equal(params_from_json(params_to_json(t)), t));
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupt model JSON is rejected") {
  std::mt19937_64 rng(2);
  const ExplicitModel m = param::construct(param::sample_params(ModelKind::kCAren, {2, 1, 1, 3}, rng));
  const nlohmann::json good = model_to_json(m);
  auto broken = [&](auto edit) {
    nlohmann::json j = good;
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(model_from_json(broken([](auto& j) { j.erase("matrices"); })), IoError);
  CHECK_THROWS_AS(model_from_json(broken([](auto& j) { j["format_version"] = 99; })), IoError);
  CHECK_THROWS_AS(model_from_json(broken([](auto& j) { j["kind"] = "lstm"; })), IoError);
  CHECK_THROWS_AS(model_from_json(broken([](auto& j) { j["matrices"]["A"] = "x"; })), IoError);
  CHECK_THROWS_AS(model_from_json(broken([](auto& j) { j["matrices"]["A"][0].erase(0); })), IoError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), IoError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), IoError);
}

TEST_CASE("config parsing") {
  const auto e = parse_config("# comment\n\nepochs = 10\nLR_Decay=0.5  # trailing\nout = \"a b.json\"\n", "t.cfg");
  REQUIRE(e.size() == 3);
  CHECK(e[0].key == "epochs");
  CHECK(e[0].value == "10");
  CHECK(e[0].line == 3);
  CHECK(e[1].key == "lr-decay");
  CHECK(e[1].value == "0.5");
  CHECK(e[2].value == "a b.json");
  auto message = [](const std::string& text) {
    try {
      parse_config(text, "t.cfg");
    } catch (const IoError& err) {
      return std::string(err.what());
    }
    return std::string();
  };
  CHECK(message("a = 1\nb 2\n").rfind("t.cfg:2:", 0) == 0);
  CHECK(message("a = 1\na = 2\n").rfind("t.cfg:2:", 0) == 0);
  CHECK(message(" = 2\n").rfind("t.cfg:1:", 0) == 0);
  CHECK(message("a = \n").rfind("t.cfg:1:", 0) == 0);
}
