#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/hjb_solver.hpp"
#include "nldiff/sde_lab.hpp"
#include "nldiff/verify.hpp"

namespace nldiff {

/// Field CSV layout: first row the x-coordinates, then one value row per
/// lattice time in descending time order (T first, 0 last). '.' decimal,
/// comma separated, full round-trip precision.
void write_value_field_csv(std::ostream& os, const ValueField& field);
void write_policy_field_csv(std::ostream& os, const PolicyField& field);

/// One terminal value per line.
void write_ensemble_csv(std::ostream& os, const PathEnsemble& ensemble);

/// JSON forms carry the lattice plus metadata; keys are emitted in a stable
/// order so identical inputs serialize byte-identically.
std::string value_field_json(const ValueField& field);
std::string policy_field_json(const PolicyField& field);

std::string condition_reports_json(const std::vector<ConditionReport>& reports);

/// Report JSON. `run_info` (wall-clock runtimes) is the only
/// non-deterministic section and is excluded from the embedded
/// report_digest.
std::string verification_report_json(const VerificationReport& report);

} // namespace nldiff
