#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pme/config.hpp"
#include "pme/errors.hpp"

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("config defaults validate") {
  pme::RunConfig cfg;
  CHECK_NOTHROW(pme::validate_config(cfg));
  CHECK(cfg.alpha == doctest::Approx(0.05));
  CHECK(cfg.eps_star == doctest::Approx(1e-3));
  CHECK(cfg.max_outer == 100);
  CHECK(cfg.n_pieces == 6);
  CHECK(cfg.lambda == 0.0);
  CHECK(cfg.seed == 1);
}

TEST_CASE("config file round trip preserves every field") {
  pme::RunConfig cfg;
  cfg.n0 = 17;
  cfg.alpha = 0.01;
  cfg.lambda = 2.5;
  cfg.n_pieces = 8;
  cfg.seed = 99;
  cfg.threads = 2;
  cfg.lambda_grid = {0.5, 1.5};
  std::string path = temp_path("pme_cfg_roundtrip.txt");
  pme::save_config(path, cfg);
  pme::RunConfig back = pme::load_config(path, pme::RunConfig{});
  CHECK(back.n0 == 17);
  CHECK(back.alpha == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(back.lambda == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(back.n_pieces == 8);
  CHECK(back.seed == 99);
  CHECK(back.threads == 2);
  REQUIRE(back.lambda_grid.size() == 2);
  CHECK(back.lambda_grid[0] == doctest::Approx(0.5));
  CHECK(back.lambda_grid[1] == doctest::Approx(1.5));
  std::remove(path.c_str());
}

TEST_CASE("config rejects unknown keys and bad values") {
  std::string path = temp_path("pme_cfg_bad.txt");
  write_file(path, "not_a_real_key=3\n");
  CHECK_THROWS_AS(pme::load_config(path, pme::RunConfig{}), pme::ValidationError);

  // Range checks fire at load time: a bad value never enters a RunConfig.
  write_file(path, "alpha=1.5\n");
  CHECK_THROWS_AS(pme::load_config(path, pme::RunConfig{}), pme::ValidationError);

  // The same check guards configs assembled in code.
  pme::RunConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(pme::validate_config(bad), pme::ValidationError);

  write_file(path, "alpha=abc\n");
  CHECK_THROWS_AS(pme::load_config(path, pme::RunConfig{}), pme::ValidationError);

  write_file(path, "alpha\n");
  CHECK_THROWS_AS(pme::load_config(path, pme::RunConfig{}), pme::ParseError);
  std::remove(path.c_str());
}

TEST_CASE("config validation covers module preconditions") {
  pme::RunConfig cfg;
  SUBCASE("negative lambda") {
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(pme::validate_config(cfg), pme::ValidationError);
  }
  SUBCASE("n_pieces below ring minimum") {
    cfg.n_pieces = 2;
    CHECK_THROWS_AS(pme::validate_config(cfg), pme::ValidationError);
  }
  SUBCASE("nonpositive em tolerance") {
    cfg.em_eps = 0.0;
    CHECK_THROWS_AS(pme::validate_config(cfg), pme::ValidationError);
  }
  SUBCASE("nonpositive stop tolerance") {
    cfg.eps_star = -1e-3;
    CHECK_THROWS_AS(pme::validate_config(cfg), pme::ValidationError);
  }
  SUBCASE("empty lambda grid allowed, defaults used") {
    cfg.lambda_grid.clear();
    CHECK_NOTHROW(pme::validate_config(cfg));
    CHECK(pme::lambda_grid_or_default(cfg).size() == 21);
  }
}

TEST_CASE("comments and blank lines are ignored") {
  std::string path = temp_path("pme_cfg_comments.txt");
  write_file(path, "# leading comment\n\nn0 = 12\n  # indented comment\nalpha=0.2\n");
  pme::RunConfig cfg = pme::load_config(path, pme::RunConfig{});
  CHECK(cfg.n0 == 12);
  CHECK(cfg.alpha == doctest::Approx(0.2));
  std::remove(path.c_str());
}

TEST_CASE("missing config file raises io error") {
  CHECK_THROWS_AS(pme::load_config(temp_path("pme_no_such_cfg.txt"), pme::RunConfig{}),
                  pme::IoError);
}
