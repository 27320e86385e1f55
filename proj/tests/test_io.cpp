#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "hetmed/dataset.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/io.hpp"
#include "hetmed/rng.hpp"

using namespace hetmed;
namespace fs = std::filesystem;

namespace {

const char* kSixRows =
    "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n\n"
    "a,1.0,0.1,2.0,0.2,10\n"
    "b,2.0,0.1,4.1,0.2,20\n"
    "c,3.0,0.1,5.9,0.2,30\n"
    "d,4.0,0.1,8.2,0.2,10\n"
    "e,5.0,0.1,9.8,0.2,20\n"
    "f,6.0,0.1,12.1,0.2,30\n";

}  // namespace

TEST_CASE("parse_aggregate_csv happy path") {
  const EffectDataset ds = parse_aggregate_csv_text(kSixRows);
  CHECK(ds.size() == 6);
  CHECK(ds.effects()[0].group_id == "a");
  CHECK(ds.effects()[5].n == 30);
  CHECK(ds.gammas()[2] == 3.0);
  CHECK(ds.covariate_dim() == 0);
}

TEST_CASE("parse_aggregate_csv schema errors") {
  CHECK_THROWS_WITH_AS(
      parse_aggregate_csv_text("group_id,gamma_hat,tau_hat,se_tau,n\n"
                               "a,1,2,0.1,10\n"),
      "missing column se_gamma", InputError);

  CHECK_THROWS_WITH_AS(
      parse_aggregate_csv_text(
          "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n,bogus\n"
          "a,1,0.1,2,0.1,10,0\n"),
      "unknown column bogus", InputError);

  CHECK_THROWS_AS(parse_aggregate_csv_text(""), InputError);
  CHECK_THROWS_AS(
      parse_aggregate_csv_text("group_id,gamma_hat,se_gamma,tau_hat,se_tau,n\n"),
      InputError);
}

TEST_CASE("parse_aggregate_csv reports the offending cell") {
  const char* text =
      "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n\n"
      "a,1.0,0.1,2.0,0.2,10\n"
      "b,2.0,0.1,4.1,0.2,20\n"
      "c,3.0,0.1,5.9,abc,30\n"
      "d,4.0,0.1,8.2,0.2,10\n";
  CHECK_THROWS_WITH_AS(parse_aggregate_csv_text(text),
                       "parse error at row 3, column se_tau", InputError);
}

TEST_CASE("parse_aggregate_csv reads cov_uv and covariate means") {
  const char* text =
      "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n,cov_uv,x_mean_age,x_mean_z\n"
      "a,1.0,0.5,2.0,0.5,10,0.01,30.5,0.1\n"
      "b,2.0,0.5,4.1,0.5,20,-0.02,28.0,0.2\n"
      "c,3.0,0.5,5.9,0.5,30,0.0,35.5,0.3\n";
  const EffectDataset ds = parse_aggregate_csv_text(text);
  CHECK(ds.covariate_dim() == 2);
  CHECK(ds.cov_uvs()[1] == -0.02);
  CHECK(ds.covariate_means()[2][0] == 35.5);
}

TEST_CASE("parse_individual_csv captures covariate names in order") {
  const char* text =
      "treatment,mediator,outcome,age,wealth,attitude\n"
      "1,2.5,3.5,20,1.5,0.1\n"
      "0,1.5,2.0,30,2.5,0.2\n";
  const IndividualDataset data = parse_individual_csv_text(text);
  CHECK(data.size() == 2);
  CHECK(data.covariate_names ==
        std::vector<std::string>{"age", "wealth", "attitude"});
  CHECK(data.covariates[1][1] == 2.5);
  CHECK(data.treatment_is_binary());
  CHECK_FALSE(data.has_labels());
}

TEST_CASE("parse_individual_csv schema and emptiness errors") {
  CHECK_THROWS_WITH_AS(parse_individual_csv_text("treatment,mediator,age\n"
                                                 "1,2,3\n"),
                       "missing column outcome", InputError);
  CHECK_THROWS_WITH_AS(
      parse_individual_csv_text("treatment,mediator,outcome\n"),
      "no data rows", InputError);
  CHECK_THROWS_AS(parse_individual_csv_text(""), InputError);
}

TEST_CASE("parse_individual_csv accepts a group column and non-binary "
          "treatment") {
  const char* text =
      "treatment,mediator,outcome,group\n"
      "0.5,2.5,3.5,g1\n"
      "-0.25,1.5,2.0,g2\n";
  const IndividualDataset data = parse_individual_csv_text(text);
  CHECK(data.has_labels());
  CHECK_FALSE(data.treatment_is_binary());
  CHECK(data.covariate_names.empty());
}

TEST_CASE("serialize -> parse round-trips the dataset bit-exactly") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SubgroupEffect> raw;
    const std::size_t K = 3 + rng.below(10);
    for (std::size_t k = 0; k < K; ++k) {
      SubgroupEffect e;
      e.group_id = "grp" + std::to_string(k);
      e.gamma_hat = rng.normal() * std::exp(rng.normal() * 3.0);
      e.tau_hat = rng.normal() * 1e-7;
      e.se_gamma = rng.gamma(1.0, 1.0);
      e.se_tau = rng.gamma(1.0, 1.0);
      const double bound = e.se_gamma * e.se_tau;
      e.cov_uv = bound * (2.0 * rng.uniform() - 1.0);
      e.n = 1 + static_cast<std::int64_t>(rng.below(100000));
      e.covariate_means = {rng.normal(), rng.normal() * 1e9};
      raw.push_back(e);
    }
    const EffectDataset ds = validate_dataset(std::move(raw));
    const std::string text = serialize_effects_csv(ds);
    const EffectDataset back = parse_aggregate_csv_text(text);
    REQUIRE(back.size() == ds.size());
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(back.gammas()[k] == ds.gammas()[k]);  // bit-level
      CHECK(back.taus()[k] == ds.taus()[k]);
      CHECK(back.se_gammas()[k] == ds.se_gammas()[k]);
      CHECK(back.se_taus()[k] == ds.se_taus()[k]);
      CHECK(back.cov_uvs()[k] == ds.cov_uvs()[k]);
      CHECK(back.effects()[k].n == ds.effects()[k].n);
      CHECK(back.covariate_means()[k] == ds.covariate_means()[k]);
      CHECK(back.weights()[k] == ds.weights()[k]);
    }
    // And serialization is stable: identical bytes on the second pass.
    CHECK(serialize_effects_csv(back) == text);
  }
}

TEST_CASE("parse_weights_csv aligns weights with dataset order") {
  const EffectDataset ds = parse_aggregate_csv_text(kSixRows);
  const char* wtext =
      "group_id,weight\n"
      "f,6\nb,2\nc,3\nd,4\ne,5\na,1\n";
  const std::vector<double> w = parse_weights_csv_text(wtext, ds);
  CHECK(w == std::vector<double>{1, 2, 3, 4, 5, 6});

  CHECK_THROWS_AS(parse_weights_csv_text("group_id,weight\na,1\n", ds),
                  InputError);
  CHECK_THROWS_AS(parse_weights_csv_text("id,w\na,1\n", ds), InputError);
}

namespace {

RunInfo test_info() {
  RunInfo info;
  info.version = "0.1.0";
  info.subcommand = "estimate";
  info.input = "input.csv";
  info.seed = 42;
  return info;
}

}  // namespace

TEST_CASE("emit_result is deterministic, strict JSON, one table row per "
          "estimator") {
  const EffectDataset ds = parse_aggregate_csv_text(kSixRows);
  std::vector<MediationResult> results;
  results.push_back(mediate(ds, ols_slope(ds.gammas(), ds.taus())));
  results.push_back(mediate(ds, bces_estimate(ds)));

  const std::string j1 = emit_result(results, test_info(), ResultFormat::json);
  const std::string j2 = emit_result(results, test_info(), ResultFormat::json);
  CHECK(j1 == j2);

  const nlohmann::json parsed = nlohmann::json::parse(j1);
  CHECK(parsed.at("seed") == 42);
  CHECK(parsed.at("results").size() == 2);
  CHECK(parsed.at("results")[0].at("method") == "naive_ols");
  CHECK(parsed.at("groups") == 6);

  const std::string table =
      emit_result(results, test_info(), ResultFormat::table);
  int rows = 0;
  for (std::size_t pos = table.find("\n"); pos != std::string::npos;
       pos = table.find("\n", pos + 1)) {
    ++rows;
  }
  // header comment + column header + 2 estimator rows + footer
  CHECK(rows == 5);
  CHECK(table.find("naive_ols") != std::string::npos);
  CHECK(table.find("bces") != std::string::npos);
}

TEST_CASE("emit_plot_data writes scatter, line, and the simex curve") {
  const EffectDataset ds = parse_aggregate_csv_text(kSixRows);
  const fs::path dir = fs::temp_directory_path() / "hetmed_io_test";
  fs::remove_all(dir);

  const SlopeFit naive = ols_slope(ds.gammas(), ds.taus());
  auto files = emit_plot_data(ds, naive, dir);
  CHECK(files.size() == 2);
  CHECK(!fs::exists(dir / "simex_curve.csv"));

  std::ifstream scatter(dir / "scatter.csv");
  int lines = 0;
  std::string line;
  while (std::getline(scatter, line)) ++lines;
  CHECK(lines == 7);  // header + 6 groups

  SimexConfig cfg;
  cfg.seed = 3;
  const SimexFit simex = simex_estimate(ds, cfg);
  files = emit_plot_data(ds, simex, dir);
  CHECK(files.size() == 3);
  std::ifstream curve(dir / "simex_curve.csv");
  lines = 0;
  while (std::getline(curve, line)) ++lines;
  CHECK(lines == 7);  // header + 5 grid rows + extrapolation row

  fs::remove_all(dir);
}

TEST_CASE("malformed text never crashes the parsers, only throws InputError") {
  Rng rng(13371337);
  const std::string alphabet = "ag,0.\n\r;x_mean_\"'\t-+eE5";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n\n";
    const std::size_t len = rng.below(160);
    for (std::size_t i = 0; i < len; ++i) {
      text.push_back(alphabet[rng.below(alphabet.size())]);
    }
    try {
      parse_aggregate_csv_text(text);
    } catch (const InputError&) {
      // expected for almost every draw
    }
    try {
      parse_individual_csv_text(text);
    } catch (const InputError&) {
    }
  }
  CHECK(true);  // reaching here means no crash and no foreign exception
}
