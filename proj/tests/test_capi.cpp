#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <string>

#include "binforward/binforward.h"

namespace {

struct Spec {
  binf_spec* p = nullptr;
  ~Spec() { binf_spec_free(p); }
};

struct Solution {
  binf_solution* p = nullptr;
  ~Solution() { binf_solution_free(p); }
};

}  // namespace

TEST_CASE("version and error strings") {
  CHECK(std::string(binf_version()) == "0.1.0");
  CHECK(std::string(binf_status_name(BINF_ERR_BUDGET)) == "budget exceeded");
}

TEST_CASE("toy rates through the c surface") {
  double bin_fwd = 0, dec_fwd = 0;
  REQUIRE(binf_toy_rates(0.4, &bin_fwd, &dec_fwd) == BINF_OK);
  CHECK(bin_fwd == doctest::Approx(0.6));
  CHECK(dec_fwd == doctest::Approx(0.2780719051126377));
  CHECK(binf_toy_rates(0.6, &bin_fwd, &dec_fwd) == BINF_ERR_INVALID);
  CHECK(std::strlen(binf_last_error()) > 0);
}

TEST_CASE("spec round trip through json text") {
  Spec toy;
  REQUIRE(binf_spec_make_toy(0.4, &toy.p) == BINF_OK);
  CHECK(binf_spec_kind(toy.p) == BINF_KIND_STATE_RELAY);
  char* text = nullptr;
  REQUIRE(binf_spec_to_json(toy.p, &text) == BINF_OK);
  Spec back;
  REQUIRE(binf_spec_from_json(text, &back.p) == BINF_OK);
  CHECK(binf_spec_kind(back.p) == BINF_KIND_STATE_RELAY);
  binf_string_free(text);

  Spec bad;
  CHECK(binf_spec_from_json("{ not json", &bad.p) == BINF_ERR_PARSE);
  CHECK(binf_spec_load("/nonexistent/p.json", &bad.p) == BINF_ERR_IO);
  CHECK(binf_spec_make_toy(0.9, &bad.p) == BINF_ERR_INVALID);
}

TEST_CASE("solve, derive and simulate through the c surface") {
  Spec toy;
  REQUIRE(binf_spec_make_toy(0.4, &toy.p) == BINF_OK);
  binf_solve_options opts;
  binf_solve_options_init(&opts);
  opts.grid_step = 0.1;
  Solution sol;
  REQUIRE(binf_solve(toy.p, &opts, &sol.p) == BINF_OK);
  CHECK(binf_solution_is_region(sol.p) == 0);
  CHECK(binf_solution_value(sol.p) >= 0.59);
  CHECK(std::string(binf_solution_param_json(sol.p)).find("p_xr") != std::string::npos);
  CHECK(std::string(binf_solution_settings_json(sol.p)).find("lower_bound") != std::string::npos);

  binf_sim_options sopts;
  binf_sim_options_init(&sopts);
  sopts.n = 10;
  sopts.blocks = 3;
  sopts.trials = 40;
  REQUIRE(binf_derive_rates(toy.p, sol.p, 0.7, &sopts) == BINF_OK);
  CHECK(sopts.r_prime[0] > 0);
  CHECK(sopts.r_tilde[0] >= sopts.r_prime[0]);

  binf_sim_result* res = nullptr;
  REQUIRE(binf_simulate(toy.p, sol.p, &sopts, &res) == BINF_OK);
  CHECK(binf_sim_row_count(res) == 120);
  binf_sim_row row;
  REQUIRE(binf_sim_row_get(res, 0, &row) == BINF_OK);
  CHECK(row.trial == 0);
  CHECK(row.block == 1);
  CHECK(binf_sim_block_error_rate(res) >= 0);
  CHECK(binf_sim_block_error_rate(res) <= 1);
  std::uint64_t pairs = 0, hits = 0;
  double expected = 0;
  binf_sim_collision_stats(res, &pairs, &hits, &expected);
  CHECK(pairs > 0);
  CHECK(expected > 0);
  CHECK(std::string(binf_sim_summary_json(res)).find("block_error_rate") != std::string::npos);
  CHECK(binf_sim_realized_rate(res, 0, 0) > 0);

  // tiny budget surfaces as the budget status
  sopts.symbol_budget = 1024;
  binf_sim_result* res2 = nullptr;
  CHECK(binf_simulate(toy.p, sol.p, &sopts, &res2) == BINF_ERR_BUDGET);
  binf_sim_result_free(res);
}

TEST_CASE("region boundary accessors") {
  const char* doc = R"({
    "schema": 1, "kind": "state_mac",
    "alphabets": {"s1": 1, "s2": 1, "x1": 2, "x2": 2, "y": 4, "z1": 1, "z2": 1},
    "state_pmf": [[1.0]],
    "channel": [[[ [[1,0,0,0],[0,1,0,0]], [[0,0,1,0],[0,0,0,1]] ]]],
    "det_links": {"z1": [[0,0]], "z2": [[0,0]]}
  })";
  Spec mac;
  REQUIRE(binf_spec_from_json(doc, &mac.p) == BINF_OK);
  binf_solve_options opts;
  binf_solve_options_init(&opts);
  Solution sol;
  REQUIRE(binf_solve(mac.p, &opts, &sol.p) == BINF_OK);
  CHECK(binf_solution_is_region(sol.p) == 1);
  REQUIRE(binf_solution_point_count(sol.p) > 0);
  double r1 = -1, r2 = -1;
  const char* active = nullptr;
  REQUIRE(binf_solution_point(sol.p, 0, &r1, &r2, &active) == BINF_OK);
  CHECK(r1 == doctest::Approx(0.0));
  CHECK(r2 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(active != nullptr);
  CHECK(binf_solution_region_contains(sol.p, 0.9, 0.9) == 1);
  CHECK(binf_solution_region_contains(sol.p, 1.5, 1.5) == 0);
  CHECK(binf_solution_point(sol.p, 99999, &r1, &r2, &active) == BINF_ERR_INVALID);
}

TEST_CASE("fm check handle") {
  Spec toy;
  REQUIRE(binf_spec_make_toy(0.3, &toy.p) == BINF_OK);
  binf_fm_report* rep = nullptr;
  REQUIRE(binf_fm_check(toy.p, 5, 0.1, 9, &rep) == BINF_OK);
  CHECK(binf_fm_report_passed(rep) == 1);
  CHECK(binf_fm_report_samples(rep) == 5);
  CHECK(binf_fm_report_failures(rep) == 0);
  CHECK(std::string(binf_fm_report_json(rep)).find("passed") != std::string::npos);
  binf_fm_report_free(rep);
  CHECK(binf_fm_check(toy.p, 0, 0.1, 9, &rep) == BINF_ERR_INVALID);
}
