#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "sievemix/errors.hpp"
#include "sievemix/io.hpp"

using namespace sievemix;

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(io::hex64(io::fnv1a64("foobar")) == "85944171f73967e8");
}

TEST_CASE("decimals parse exactly") {
  auto root = YAML::Load("{a: \"0.1\", b: 3, c: nan, d: 1e400, e: abc}");
  CHECK(io::parse_decimal(root["a"], "a") == 0.1);
  CHECK(io::parse_decimal(root["b"], "b") == 3.0);
  CHECK_THROWS_AS(io::parse_decimal(root["c"], "c"), ValidationError);
  CHECK_THROWS_AS(io::parse_decimal(root["d"], "d"), ValidationError);
  CHECK_THROWS_AS(io::parse_decimal(root["e"], "e"), ValidationError);
  CHECK(io::decimal_or(root, "missing", 2.5) == 2.5);
  CHECK_THROWS_AS(io::parse_u64("-3", "n"), ValidationError);
  CHECK(io::parse_u64(" 42 ", "n") == 42);
}

TEST_CASE("families and schedules from config") {
  auto spec = io::parse_spec(YAML::Load("[normal, {kind: student_t, dof: 3}, {kind: uniform, beta: 3}]"));
  REQUIRE(spec.size() == 3);
  CHECK(spec[0].kind() == FamilyKind::normal);
  CHECK(spec[1].kind() == FamilyKind::student_t);
  CHECK(spec[2].envelope().beta == 3.0);
  CHECK_THROWS_AS(io::parse_family(YAML::Load("{kind: student_t}")), ValidationError);
  CHECK_THROWS_AS(io::parse_family(YAML::Load("custom")), ValidationError);
  CHECK_THROWS_AS(io::parse_spec(YAML::Load("[]")), ValidationError);

  auto s = io::parse_schedule(YAML::Load("{c0: 1, override: 2}"));
  CHECK(s.d == 0.5);
  CHECK(s.exponent() == 2.0);
  CHECK_THROWS_AS(io::parse_schedule(YAML::Load("{c0: 1, d: 1.5}")), ValidationError);
  CHECK_THROWS_AS(io::parse_grid(YAML::Load("{lo: 1, hi: 0}")), ValidationError);
}

TEST_CASE("mixture round trip is bit-exact") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10), s(1e-3, 5), w(0.01, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Component> comps;
    double a = w(rng), b = w(rng);
    comps.push_back(Component::make(a / (a + b), ComponentFamily::normal(), u(rng), s(rng)));
    comps.push_back(Component::make(b / (a + b), ComponentFamily::student_t(2.5), u(rng), s(rng)));
    auto theta = MixtureParams::full(comps);
    auto back = io::parse_mixture(YAML::Load(io::mixture_to_yaml(theta)));
    REQUIRE(back.size() == 2);
    for (std::size_t m = 0; m < 2; ++m) {
      CHECK(back[m].alpha == theta[m].alpha);
      CHECK(back[m].mu == theta[m].mu);
      CHECK(back[m].sigma == theta[m].sigma);
      CHECK(back[m].family.kind() == theta[m].family.kind());
    }
    CHECK(back[1].family.dof() == 2.5);
  }
}

TEST_CASE("mixture validation from config") {
  CHECK_THROWS_AS(io::parse_mixture(YAML::Load("[{alpha: 0.6, kind: normal, mu: 0, sigma: 1}]")), ValidationError);
  CHECK_NOTHROW(io::parse_mixture(YAML::Load("[{alpha: 0.6, kind: normal, mu: 0, sigma: 1}]"), true));
  CHECK_THROWS_AS(io::parse_mixture(YAML::Load("[{alpha: 1, kind: normal, mu: 0, sigma: 0}]")), ValidationError);
}

TEST_CASE("data files") {
  auto xs = io::parse_data_text("# header\n1.5\n\n  -2 # trailing\n3e-1\n");
  REQUIRE(xs.size() == 3);
  CHECK(xs[0] == 1.5);
  CHECK(xs[1] == -2.0);
  CHECK(xs[2] == 0.3);
  try {
    io::parse_data_text("1\nbad\n", "sample.txt");
    FAIL("expected failure");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("sample.txt:2") != std::string::npos);
  }
  CHECK_THROWS_AS(io::read_data_file("/nonexistent/data.txt"), ValidationError);
}

TEST_CASE("csv and records") {
  io::CsvTable t({"a", "b"});
  t.row({"1", "x,y"}).row({"2", "say \"hi\""});
  CHECK(t.str() == "a,b\n1,\"x,y\"\n2,\"say \"\"hi\"\"\"\n");
  CHECK_THROWS_AS(t.row({"only"}), ValidationError);

  io::Record r;
  r.add("z", 0.1).add("a", std::size_t{3}).add("flag", true).add("name", "two");
  auto node = YAML::Load(r.to_yaml());
  CHECK(node["z"].as<double>() == 0.1);
  CHECK(node["a"].as<int>() == 3);
  CHECK(node["flag"].as<bool>());
  // insertion order is preserved
  CHECK(r.to_yaml().find("z:") < r.to_yaml().find("a:"));
}

TEST_CASE("number formatting") {
  CHECK(io::shortest(0.1) == "0.1");
  CHECK(io::fixed17(0.1) == "0.10000000000000001");
  CHECK(io::fixed17(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("config text and hash") {
  auto c = io::parse_config_text("seed: 3\n");
  CHECK(c.hash == io::fnv1a64("seed: 3\n"));
  CHECK_THROWS_AS(io::parse_config_text("[1, 2"), ValidationError);
  CHECK_THROWS_AS(io::parse_config_text("- 1\n- 2\n"), ValidationError);

  auto dir = std::filesystem::temp_directory_path() / "sievemix_io_test";
  std::filesystem::remove_all(dir);
  io::write_text(dir / "nested" / "f.txt", "hello");
  std::ifstream in(dir / "nested" / "f.txt");
  std::string s;
  in >> s;
  CHECK(s == "hello");
  std::filesystem::remove_all(dir);
}

TEST_CASE("svg chart") {
  std::string svg = io::svg_line_chart("t", "n", "d", {{"s", {{100, 0.4}, {400, 0.2}, {1600, 0.1}}}});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg == io::svg_line_chart("t", "n", "d", {{"s", {{100, 0.4}, {400, 0.2}, {1600, 0.1}}}}));
}
