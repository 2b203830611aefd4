#include "nldiff/io.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <ostream>

#include <json.hpp>

#include "nldiff/digest.hpp"

namespace nldiff {

namespace {

using ordered_json = nlohmann::ordered_json;

std::int64_t unix_millis_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void append_csv_number(std::string& line, double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    line.append(buf.data(), ptr);
}

void write_csv_row(std::ostream& os, const std::vector<double>& row) {
    std::string line;
    line.reserve(row.size() * 12);
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (j > 0) line.push_back(',');
        append_csv_number(line, row[j]);
    }
    line.push_back('\n');
    os << line;
}

void write_lattice_csv(std::ostream& os, const std::vector<double>& xs,
                       const std::vector<std::vector<double>>& rows) {
    write_csv_row(os, xs);
    for (std::size_t i = rows.size(); i-- > 0;) {
        write_csv_row(os, rows[i]);
    }
}

const char* boundary_name(BoundaryMode mode) {
    return mode == BoundaryMode::linear_extrapolation ? "linear_extrapolation"
                                                      : "dirichlet_frozen";
}

const char* status_name(CheckStatus status) {
    switch (status) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::gated: return "gated";
    }
    return "?";
}

} // namespace

void write_value_field_csv(std::ostream& os, const ValueField& field) {
    write_lattice_csv(os, field.xs, field.values);
}

void write_policy_field_csv(std::ostream& os, const PolicyField& field) {
    write_lattice_csv(os, field.xs, field.f_star);
}

void write_ensemble_csv(std::ostream& os, const PathEnsemble& ensemble) {
    std::string line;
    for (double v : ensemble.terminal) {
        line.clear();
        append_csv_number(line, v);
        line.push_back('\n');
        os << line;
    }
}

std::string value_field_json(const ValueField& field) {
    ordered_json j;
    j["scheme"] = field.scheme;
    j["dt"] = field.dt;
    j["boundary"] = boundary_name(field.boundary);
    j["times"] = field.times;
    j["xs"] = field.xs;
    j["values"] = field.values;
    return j.dump();
}

std::string policy_field_json(const PolicyField& field) {
    ordered_json j;
    j["times"] = field.times;
    j["xs"] = field.xs;
    j["f_star"] = field.f_star;
    return j.dump();
}

std::string condition_reports_json(const std::vector<ConditionReport>& reports) {
    ordered_json arr = ordered_json::array();
    for (const ConditionReport& rep : reports) {
        ordered_json r;
        r["name"] = rep.name;
        r["declared"] = rep.declared;
        r["pass"] = rep.pass;
        r["estimated_constant"] = rep.estimated_constant;
        if (rep.witness) {
            ordered_json w;
            w["f"] = rep.witness->f;
            w["x"] = rep.witness->x;
            if (rep.witness->y) {
                w["y"] = *rep.witness->y;
            }
            r["witness"] = w;
        } else {
            r["witness"] = nullptr;
        }
        r["note"] = rep.note;
        arr.push_back(std::move(r));
    }
    ordered_json j;
    j["conditions"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::string verification_report_json(const VerificationReport& report) {
    ordered_json j;
    j["spec_digest"] = report.spec_digest;
    j["grid_digest"] = report.grid_digest;
    j["seed"] = report.seed;
    ordered_json checks = ordered_json::array();
    ordered_json runtimes;
    for (const CheckRecord& rec : report.records) {
        ordered_json r;
        r["check_id"] = rec.check_id;
        r["inputs_digest"] = rec.inputs_digest;
        ordered_json metrics = ordered_json::object();
        for (const Metric& m : rec.metrics) {
            metrics[m.name] = m.value;
        }
        r["metrics"] = std::move(metrics);
        r["tolerance"] = rec.tolerance;
        r["status"] = status_name(rec.status);
        if (rec.status != CheckStatus::gated) {
            r["pass"] = (rec.status == CheckStatus::pass);
        }
        r["notes"] = rec.notes;
        checks.push_back(std::move(r));
        runtimes[rec.check_id] = rec.runtime_seconds;
    }
    j["checks"] = std::move(checks);
    j["report_digest"] = to_hex(fnv1a64(j.dump()));
    // Wall-clock data lives outside the digest so replays compare clean.
    j["run_info"] = ordered_json{{"generated_at_unix_ms", unix_millis_now()},
                                 {"runtimes_seconds", std::move(runtimes)}};
    return j.dump(2) + "\n";
}

} // namespace nldiff
