#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "nldiff/config.hpp"
#include "nldiff/digest.hpp"
#include "nldiff/errors.hpp"
#include "nldiff/io.hpp"

using namespace nldiff;

namespace {

const char* kGoodConfig = R"({
  "control": {
    "f_interval": [1, 4],
    "n_f": 9,
    "b": "0",
    "a": "f",
    "conditions": ["ellipticity", "zero_drift"]
  },
  "grid": {"x_min": -10, "x_max": 10, "nx": 101, "T": 1.0,
           "dt": {"policy": "auto_cfl", "safety": 0.8},
           "boundary": "linear_extrapolation"},
  "terminal": {"builtin": "square"},
  "mc": {"x0": 0.5, "T": 2.0, "n_steps": 128, "n_paths": 1000, "seed": 99,
         "policy": {"constant": 4}},
  "verify": {"checks": ["semigroup", "smoothing"],
             "tolerances": {"tol_pde": 0.01},
             "semigroup": {"s": 0.25, "t": 0.5},
             "smoothing": {"t": 0.1, "nx_coarse": 51}},
  "check_spec": {"n_samples": 33},
  "output": {"value_csv": "v.csv", "report_json": "report.json"}
})";

} // namespace

TEST_CASE("a full configuration parses into typed blocks") {
    const Config cfg = parse_config(kGoodConfig);
    CHECK(cfg.control.f_values().size() == 9);
    CHECK(cfg.control.declared().ellipticity);
    CHECK(cfg.control.declared().zero_drift);
    CHECK_FALSE(cfg.control.declared().convexity);
    CHECK(cfg.grid.nx == 101);
    CHECK(cfg.grid.dt_policy.kind == DtPolicy::Kind::auto_cfl);
    CHECK(cfg.grid.dt_policy.safety == doctest::Approx(0.8));
    REQUIRE(cfg.terminal.has_value());
    CHECK(cfg.terminal->fn(3.0) == doctest::Approx(9.0));
    CHECK(cfg.mc.x0 == doctest::Approx(0.5));
    CHECK(cfg.mc.T.value() == doctest::Approx(2.0));
    CHECK(cfg.mc.seed == 99);
    CHECK(cfg.mc.policy == PolicyKind::constant);
    CHECK(cfg.mc.constant_f == doctest::Approx(4.0));
    CHECK(cfg.verify.checks.size() == 2);
    CHECK(cfg.verify.tolerances.tol_pde == doctest::Approx(0.01));
    CHECK(cfg.verify.tolerances.tol_mc_bias == doctest::Approx(0.02)); // default kept
    CHECK(cfg.verify.semigroup_s.value() == doctest::Approx(0.25));
    CHECK(cfg.check_spec.n_samples == 33);
    CHECK(cfg.output.value_csv == "v.csv");
    CHECK(cfg.output.report_json == "report.json");
}

TEST_CASE("unknown keys are rejected everywhere") {
    nlohmann::json doc = nlohmann::json::parse(kGoodConfig);
    doc["surprise"] = 1;
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["control"]["surprise"] = 1;
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["grid"]["dt"]["surprise"] = 1;
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["verify"]["tolerances"]["surprise"] = 1;
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);
}

TEST_CASE("schema violations raise ConfigError") {
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("[]"), ConfigError);
    CHECK_THROWS_AS(parse_config("{}"), ConfigError); // missing control/grid

    nlohmann::json doc = nlohmann::json::parse(kGoodConfig);
    doc["control"].erase("f_interval");
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["control"]["f_values"] = {1.0, 2.0}; // both forms present
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["grid"]["T"] = -1.0;
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["control"]["conditions"] = {"no_such_condition"};
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["verify"]["checks"] = {"no_such_check"};
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["terminal"] = {{"builtin", "no_such_builtin"}};
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["terminal"] = {{"expr", "f*x"}}; // terminal may not use f
    CHECK_THROWS_AS(parse_config(doc.dump()), ConfigError);

    doc = nlohmann::json::parse(kGoodConfig);
    doc["control"]["a"] = "2*(";
    CHECK_THROWS_AS(parse_config(doc.dump()), SyntaxError);
}

TEST_CASE("terminal builtins evaluate as documented") {
    nlohmann::json doc = nlohmann::json::parse(kGoodConfig);
    doc["terminal"] = {{"builtin", "indicator_leq"}, {"c", 0.5}};
    Config cfg = parse_config(doc.dump());
    CHECK(cfg.terminal->fn(0.5) == 1.0);
    CHECK(cfg.terminal->fn(0.51) == 0.0);

    doc["terminal"] = {{"builtin", "constant"}, {"c", -3.0}};
    cfg = parse_config(doc.dump());
    CHECK(cfg.terminal->fn(99.0) == -3.0);

    doc["terminal"] = {{"expr", "x^2 + 1"}};
    cfg = parse_config(doc.dump());
    CHECK(cfg.terminal->fn(2.0) == doctest::Approx(5.0));
}

TEST_CASE("value field CSV: x header, then t-descending rows") {
    ValueField field;
    field.xs = {-1.0, 0.0, 1.0};
    field.times = {0.0, 0.5, 1.0};
    field.values = {{10.0, 11.0, 12.0}, {20.0, 21.0, 22.0}, {30.0, 31.0, 32.0}};
    field.dt = 0.5;
    std::ostringstream os;
    write_value_field_csv(os, field);
    CHECK(os.str() == "-1,0,1\n30,31,32\n20,21,22\n10,11,12\n");
}

TEST_CASE("ensemble CSV: one terminal value per row") {
    PathEnsemble ens;
    ens.terminal = {1.5, -2.0, 0.25};
    std::ostringstream os;
    write_ensemble_csv(os, ens);
    CHECK(os.str() == "1.5\n-2\n0.25\n");
}

TEST_CASE("field JSON is stable and complete") {
    ValueField field;
    field.xs = {0.0, 1.0};
    field.times = {0.0, 1.0};
    field.values = {{1.0, 2.0}, {3.0, 4.0}};
    field.scheme = "s";
    field.dt = 1.0;
    const std::string a = value_field_json(field);
    const std::string b = value_field_json(field);
    CHECK(a == b);
    const auto parsed = nlohmann::json::parse(a);
    CHECK(parsed["xs"].size() == 2);
    CHECK(parsed["values"][1][1] == 4.0);
    CHECK(parsed["boundary"] == "linear_extrapolation");
}

TEST_CASE("verification report JSON: digest ignores run_info") {
    VerificationReport report;
    report.spec_digest = "abc";
    report.grid_digest = "def";
    report.seed = 7;
    CheckRecord rec;
    rec.check_id = "semigroup";
    rec.inputs_digest = "123";
    rec.metrics = {{"sup_distance_interior", 0.001}};
    rec.tolerance = 0.005;
    rec.status = CheckStatus::pass;
    report.records.push_back(rec);

    VerificationReport slower = report;
    slower.records[0].runtime_seconds = 99.0;

    const auto a = nlohmann::json::parse(verification_report_json(report));
    const auto b = nlohmann::json::parse(verification_report_json(slower));
    CHECK(a["report_digest"] == b["report_digest"]);
    CHECK(a["run_info"] != b["run_info"]);
    CHECK(a["checks"][0]["pass"] == true);

    CheckRecord gated;
    gated.check_id = "linearization_increasing";
    gated.status = CheckStatus::gated;
    gated.notes = "hypothesis not met";
    report.records.push_back(gated);
    const auto c = nlohmann::json::parse(verification_report_json(report));
    CHECK(c["checks"][1]["status"] == "gated");
    CHECK(c["checks"][1].contains("pass") == false);
}

TEST_CASE("spec and grid digests separate distinct inputs") {
    const ControlSpec a =
        ControlSpec::from_interval(1.0, 4.0, 9, Expr::parse("0"), Expr::parse("f"));
    const ControlSpec b =
        ControlSpec::from_interval(1.0, 4.0, 9, Expr::parse("0"), Expr::parse("f + 1"));
    CHECK(spec_digest(a) != spec_digest(b));
    CHECK(spec_digest(a) == spec_digest(a));

    ConditionFlags flags;
    flags.ellipticity = true;
    const ControlSpec c =
        ControlSpec::from_interval(1.0, 4.0, 9, Expr::parse("0"), Expr::parse("f"), flags);
    CHECK(spec_digest(a) != spec_digest(c));

    GridSpec g1;
    GridSpec g2;
    g2.nx = 201;
    CHECK(grid_digest(g1) != grid_digest(g2));
}
