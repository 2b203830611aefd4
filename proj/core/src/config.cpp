#include "nldiff/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nldiff/errors.hpp"

namespace nldiff {

namespace {

using json = nlohmann::json;

void require_keys(const json& obj, const std::string& context,
                  std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + item.key() + "' in " + context);
        }
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_double(const json& obj, const std::string& context, const char* key) {
    const json* v = find(obj, key);
    if (!v || !v->is_number()) {
        throw ConfigError(context + "." + key + " must be a number");
    }
    return v->get<double>();
}

double get_double_or(const json& obj, const std::string& context, const char* key,
                     double fallback) {
    return find(obj, key) ? get_double(obj, context, key) : fallback;
}

int get_int(const json& obj, const std::string& context, const char* key) {
    const json* v = find(obj, key);
    if (!v || !v->is_number_integer()) {
        throw ConfigError(context + "." + key + " must be an integer");
    }
    return v->get<int>();
}

int get_int_or(const json& obj, const std::string& context, const char* key, int fallback) {
    return find(obj, key) ? get_int(obj, context, key) : fallback;
}

std::string get_string(const json& obj, const std::string& context, const char* key) {
    const json* v = find(obj, key);
    if (!v || !v->is_string()) {
        throw ConfigError(context + "." + key + " must be a string");
    }
    return v->get<std::string>();
}

ConditionFlags parse_conditions(const json& arr) {
    ConditionFlags flags;
    if (!arr.is_array()) {
        throw ConfigError("control.conditions must be an array of condition names");
    }
    for (const json& item : arr) {
        if (!item.is_string()) {
            throw ConfigError("control.conditions entries must be strings");
        }
        const std::string name = item.get<std::string>();
        if (name == "convexity") flags.convexity = true;
        else if (name == "linear_growth") flags.linear_growth = true;
        else if (name == "lipschitz") flags.lipschitz = true;
        else if (name == "local_holder") flags.local_holder = true;
        else if (name == "ellipticity") flags.ellipticity = true;
        else if (name == "continuity_in_control") flags.continuity_in_control = true;
        else if (name == "certain_volatility") flags.certain_volatility = true;
        else if (name == "zero_drift") flags.zero_drift = true;
        else throw ConfigError("unknown condition '" + name + "' in control.conditions");
    }
    return flags;
}

ControlSpec parse_control(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("control block must be an object");
    }
    require_keys(obj, "control", {"f_values", "f_interval", "n_f", "b", "a", "conditions"});
    const Expr b = Expr::parse(get_string(obj, "control", "b"));
    const Expr a = Expr::parse(get_string(obj, "control", "a"));
    ConditionFlags flags;
    if (const json* conds = find(obj, "conditions")) {
        flags = parse_conditions(*conds);
    }

    const json* values = find(obj, "f_values");
    const json* interval = find(obj, "f_interval");
    if ((values != nullptr) == (interval != nullptr)) {
        throw ConfigError("control needs exactly one of f_values or f_interval");
    }
    if (values) {
        if (find(obj, "n_f")) {
            throw ConfigError("control.n_f only applies to f_interval");
        }
        if (!values->is_array() || values->empty()) {
            throw ConfigError("control.f_values must be a non-empty array of numbers");
        }
        std::vector<double> fs;
        for (const json& v : *values) {
            if (!v.is_number()) {
                throw ConfigError("control.f_values entries must be numbers");
            }
            fs.push_back(v.get<double>());
        }
        return ControlSpec::from_values(std::move(fs), b, a, flags);
    }
    if (!interval->is_array() || interval->size() != 2 || !(*interval)[0].is_number() ||
        !(*interval)[1].is_number()) {
        throw ConfigError("control.f_interval must be [f_lo, f_hi]");
    }
    const int n_f = get_int_or(obj, "control", "n_f", ControlSpec::kDefaultIntervalNodes);
    return ControlSpec::from_interval((*interval)[0].get<double>(), (*interval)[1].get<double>(),
                                      n_f, b, a, flags);
}

GridSpec parse_grid(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("grid block must be an object");
    }
    require_keys(obj, "grid", {"x_min", "x_max", "nx", "T", "dt", "boundary"});
    GridSpec grid;
    grid.x_min = get_double(obj, "grid", "x_min");
    grid.x_max = get_double(obj, "grid", "x_max");
    grid.nx = get_int(obj, "grid", "nx");
    grid.T = get_double(obj, "grid", "T");
    if (!(grid.T > 0.0)) {
        throw ConfigError("grid.T must be positive");
    }
    if (const json* dt = find(obj, "dt")) {
        if (!dt->is_object()) {
            throw ConfigError("grid.dt must be an object");
        }
        require_keys(*dt, "grid.dt", {"policy", "safety", "dt"});
        const std::string policy = get_string(*dt, "grid.dt", "policy");
        if (policy == "auto_cfl") {
            grid.dt_policy = DtPolicy::auto_cfl(get_double_or(*dt, "grid.dt", "safety", 0.9));
            if (find(*dt, "dt")) {
                throw ConfigError("grid.dt.dt only applies to the fixed policy");
            }
        } else if (policy == "fixed") {
            grid.dt_policy = DtPolicy::fixed(get_double(*dt, "grid.dt", "dt"));
            if (find(*dt, "safety")) {
                throw ConfigError("grid.dt.safety only applies to the auto_cfl policy");
            }
        } else {
            throw ConfigError("grid.dt.policy must be 'auto_cfl' or 'fixed'");
        }
    }
    if (const json* boundary = find(obj, "boundary")) {
        if (!boundary->is_string()) {
            throw ConfigError("grid.boundary must be a string");
        }
        const std::string name = boundary->get<std::string>();
        if (name == "linear_extrapolation") {
            grid.boundary = BoundaryMode::linear_extrapolation;
        } else if (name == "dirichlet_frozen") {
            grid.boundary = BoundaryMode::dirichlet_frozen;
        } else {
            throw ConfigError("grid.boundary must be 'linear_extrapolation' or "
                              "'dirichlet_frozen'");
        }
    }
    grid.validate();
    return grid;
}

TerminalFn parse_terminal(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("terminal block must be an object");
    }
    require_keys(obj, "terminal", {"expr", "builtin", "c"});
    const json* expr = find(obj, "expr");
    const json* builtin = find(obj, "builtin");
    if ((expr != nullptr) == (builtin != nullptr)) {
        throw ConfigError("terminal needs exactly one of expr or builtin");
    }
    if (expr) {
        if (find(obj, "c")) {
            throw ConfigError("terminal.c only applies to builtins");
        }
        const std::string text = get_string(obj, "terminal", "expr");
        Expr parsed = Expr::parse(text);
        if (parsed.depends_on_f()) {
            throw ConfigError("terminal expression may only use the variable x");
        }
        return TerminalFn{text, [parsed](double x) { return parsed.eval(0.0, x); }};
    }
    const std::string name = get_string(obj, "terminal", "builtin");
    const double c = get_double_or(obj, "terminal", "c", 0.0);
    if (name == "square") {
        return TerminalFn{"square", [](double x) { return x * x; }};
    }
    if (name == "neg_square") {
        return TerminalFn{"neg_square", [](double x) { return -x * x; }};
    }
    if (name == "abs") {
        return TerminalFn{"abs", [](double x) { return std::fabs(x); }};
    }
    if (name == "tanh") {
        return TerminalFn{"tanh", [](double x) { return std::tanh(x); }};
    }
    if (name == "indicator_leq") {
        std::ostringstream label;
        label << "indicator_leq(" << c << ")";
        return TerminalFn{label.str(), [c](double x) { return x <= c ? 1.0 : 0.0; }};
    }
    if (name == "constant") {
        std::ostringstream label;
        label << "constant(" << c << ")";
        return TerminalFn{label.str(), [c](double) { return c; }};
    }
    throw ConfigError("unknown terminal builtin '" + name + "'");
}

McConfig parse_mc(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("mc block must be an object");
    }
    require_keys(obj, "mc", {"x0", "T", "n_steps", "n_paths", "seed", "policy"});
    McConfig mc;
    mc.x0 = get_double_or(obj, "mc", "x0", 0.0);
    if (find(obj, "T")) {
        mc.T = get_double(obj, "mc", "T");
    }
    mc.n_steps = get_int_or(obj, "mc", "n_steps", mc.n_steps);
    mc.n_paths = get_int_or(obj, "mc", "n_paths", mc.n_paths);
    if (const json* seed = find(obj, "seed")) {
        if (!seed->is_number_integer()) {
            throw ConfigError("mc.seed must be an integer");
        }
        mc.seed = seed->get<std::uint64_t>();
    }
    if (const json* policy = find(obj, "policy")) {
        if (policy->is_string()) {
            const std::string name = policy->get<std::string>();
            if (name == "extremal_a_star") mc.policy = PolicyKind::extremal_a_star;
            else if (name == "extremal_b_star") mc.policy = PolicyKind::extremal_b_star;
            else if (name == "feedback") mc.policy = PolicyKind::feedback;
            else throw ConfigError("unknown mc.policy '" + name + "'");
        } else if (policy->is_object()) {
            require_keys(*policy, "mc.policy", {"constant"});
            mc.policy = PolicyKind::constant;
            mc.constant_f = get_double(*policy, "mc.policy", "constant");
        } else {
            throw ConfigError("mc.policy must be a string or {\"constant\": f}");
        }
    }
    return mc;
}

VerifyConfig parse_verify(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("verify block must be an object");
    }
    require_keys(obj, "verify",
                 {"checks", "tolerances", "semigroup", "smoothing", "moment_scaling"});
    VerifyConfig v;
    if (const json* checks = find(obj, "checks")) {
        if (!checks->is_array()) {
            throw ConfigError("verify.checks must be an array of check ids");
        }
        for (const json& item : *checks) {
            if (!item.is_string()) {
                throw ConfigError("verify.checks entries must be strings");
            }
            const std::string id = item.get<std::string>();
            bool known = false;
            for (const std::string& candidate : known_check_ids()) {
                if (candidate == id) {
                    known = true;
                    break;
                }
            }
            if (!known) {
                throw ConfigError("unknown check id '" + id + "' in verify.checks");
            }
            v.checks.push_back(id);
        }
    }
    if (const json* tols = find(obj, "tolerances")) {
        require_keys(*tols, "verify.tolerances", {"tol_pde", "tol_mc_bias"});
        v.tolerances.tol_pde =
            get_double_or(*tols, "verify.tolerances", "tol_pde", v.tolerances.tol_pde);
        v.tolerances.tol_mc_bias =
            get_double_or(*tols, "verify.tolerances", "tol_mc_bias", v.tolerances.tol_mc_bias);
    }
    if (const json* sg = find(obj, "semigroup")) {
        require_keys(*sg, "verify.semigroup", {"s", "t"});
        if (find(*sg, "s")) v.semigroup_s = get_double(*sg, "verify.semigroup", "s");
        if (find(*sg, "t")) v.semigroup_t = get_double(*sg, "verify.semigroup", "t");
    }
    if (const json* sm = find(obj, "smoothing")) {
        require_keys(*sm, "verify.smoothing", {"t", "nx_coarse"});
        v.smoothing_t = get_double_or(*sm, "verify.smoothing", "t", v.smoothing_t);
        v.smoothing_nx_coarse = get_int_or(*sm, "verify.smoothing", "nx_coarse", 0);
    }
    if (const json* ms = find(obj, "moment_scaling")) {
        require_keys(*ms, "verify.moment_scaling", {"gaps"});
        if (const json* gaps = find(*ms, "gaps")) {
            if (!gaps->is_array()) {
                throw ConfigError("verify.moment_scaling.gaps must be an array");
            }
            for (const json& g : *gaps) {
                if (!g.is_number()) {
                    throw ConfigError("verify.moment_scaling.gaps entries must be numbers");
                }
                v.moment_gaps.push_back(g.get<double>());
            }
        }
    }
    return v;
}

CheckSpecConfig parse_check_spec(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("check_spec block must be an object");
    }
    require_keys(obj, "check_spec", {"n_samples"});
    CheckSpecConfig c;
    c.n_samples = get_int_or(obj, "check_spec", "n_samples", c.n_samples);
    return c;
}

OutputConfig parse_output(const json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("output block must be an object");
    }
    require_keys(obj, "output",
                 {"value_csv", "value_json", "policy_csv", "policy_json", "linear_csv",
                  "report_json", "ensemble_csv"});
    OutputConfig out;
    auto read = [&](const char* key, std::string& target) {
        if (find(obj, key)) {
            target = get_string(obj, "output", key);
        }
    };
    read("value_csv", out.value_csv);
    read("value_json", out.value_json);
    read("policy_csv", out.policy_csv);
    read("policy_json", out.policy_json);
    read("linear_csv", out.linear_csv);
    read("report_json", out.report_json);
    read("ensemble_csv", out.ensemble_csv);
    return out;
}

} // namespace

const std::vector<std::string>& known_check_ids() {
    static const std::vector<std::string> ids = {
        "semigroup",         "linearization_convex", "linearization_increasing",
        "smoothing",         "selection_attains",    "moment_scaling"};
    return ids;
}

Config parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config root must be an object");
    }
    require_keys(doc, "config",
                 {"control", "grid", "terminal", "mc", "verify", "check_spec", "output"});
    const json* control = find(doc, "control");
    const json* grid = find(doc, "grid");
    if (!control || !grid) {
        throw ConfigError("config needs control and grid blocks");
    }

    Config cfg{parse_control(*control), parse_grid(*grid), std::nullopt, {}, {}, {}, {}};
    if (const json* terminal = find(doc, "terminal")) {
        cfg.terminal = parse_terminal(*terminal);
    }
    if (const json* mc = find(doc, "mc")) {
        cfg.mc = parse_mc(*mc);
    }
    if (const json* verify = find(doc, "verify")) {
        cfg.verify = parse_verify(*verify);
    }
    if (const json* check_spec = find(doc, "check_spec")) {
        cfg.check_spec = parse_check_spec(*check_spec);
    }
    if (const json* output = find(doc, "output")) {
        cfg.output = parse_output(*output);
    }
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

} // namespace nldiff
