#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/hjb_solver.hpp"
#include "nldiff/verify.hpp"

namespace nldiff {

enum class PolicyKind { extremal_a_star, extremal_b_star, feedback, constant };

struct McConfig {
    double x0 = 0.0;
    std::optional<double> T; // defaults to grid.T
    int n_steps = 256;
    int n_paths = 100000;
    std::uint64_t seed = 12345;
    PolicyKind policy = PolicyKind::extremal_a_star;
    double constant_f = 0.0; // for PolicyKind::constant
};

struct VerifyConfig {
    std::vector<std::string> checks; // empty = all
    Tolerances tolerances;
    std::optional<double> semigroup_s; // default grid.T / 2
    std::optional<double> semigroup_t;
    double smoothing_t = 0.25;
    int smoothing_nx_coarse = 0; // 0 = (nx + 1) / 2
    std::vector<double> moment_gaps; // fractions of T; empty = dyadic default
};

struct CheckSpecConfig {
    int n_samples = 65;
};

struct OutputConfig {
    std::string value_csv;
    std::string value_json;
    std::string policy_csv;
    std::string policy_json;
    std::string linear_csv;
    std::string report_json;
    std::string ensemble_csv;
};

/// Parsed and validated JSON configuration. Unknown keys anywhere in the
/// document are rejected.
struct Config {
    ControlSpec control;
    GridSpec grid;
    std::optional<TerminalFn> terminal;
    McConfig mc;
    VerifyConfig verify;
    CheckSpecConfig check_spec;
    OutputConfig output;
};

/// Parses a configuration document. Throws ConfigError on schema problems
/// and SyntaxError / UnknownIdentifier on bad coefficient expressions.
Config parse_config(const std::string& json_text);

Config load_config_file(const std::string& path);

/// Names accepted in the verify.checks list, in default execution order.
const std::vector<std::string>& known_check_ids();

} // namespace nldiff
