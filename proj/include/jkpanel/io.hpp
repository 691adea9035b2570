#pragma once

#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>

#include "jkpanel/design.hpp"
#include "jkpanel/estimators.hpp"
#include "jkpanel/inference.hpp"
#include "jkpanel/sim.hpp"
#include "jkpanel/weights.hpp"

namespace jkpanel {

using Json = nlohmann::ordered_json;

std::string read_file(const std::string& path);  // ParseError if unreadable
Json parse_json_text(const std::string& text);   // ParseError on malformed input

// Design files:
//   dims            [N_1, ..., N_K]
//   fixed_effects   [{"axes": [k, ...], "order": l}, ...]
//   bias_terms      [[e_1, ..., e_K], ...] with exponents as numbers or "p/q";
//                   replaces fixed_effects (alias bias_terms_override)
//   subsamples      list; each entry is a list with one selection per axis, or
//                   {"axes": [...]} wrapping that list. A selection is
//                   "all" | [[lo, hi], ...] | {"blocks": [[lo, hi], ...]} |
//                   {"part": [k, p]} | {"prefix": [j, p]}
//   C               optional m x m covariance override (alias C_override)
//   rate            optional label
// The first subsample must be the full sample.
Design design_from_json(const Json& j);
Json design_to_json(const Design& d);
Design load_design(const std::string& path);

// Hex FNV-1a digest of the canonical design JSON.
std::string design_digest(const Design& d);

Json matrix_to_json(const linalg::Matrix& m);
linalg::Matrix matrix_from_json(const Json& j);
Json vector_to_json(const linalg::Vector& v);

// Long-format CSV: one integer index column per axis (0-based and dense),
// then named variable columns. Every grid cell must appear exactly once
// (ShapeMismatch otherwise). When `expected` is given the inferred shape must
// match it.
PanelDataset read_panel_csv(std::istream& in, std::size_t num_axes,
                            const std::optional<PanelShape>& expected = std::nullopt);
PanelDataset load_panel_csv(const std::string& path, std::size_t num_axes,
                            const std::optional<PanelShape>& expected = std::nullopt);
// Index columns are named i0, i1, ...; variables follow in name order with
// full double precision.
void write_panel_csv(std::ostream& out, const PanelDataset& data);

Json weights_to_json(const WeightSolution& w);
Json diagnostics_to_json(const DesignDiagnostics& d);
Json result_to_json(const InferenceResult& r, const Design& design);

// Study config files: dgp, phi, dims, designs (a list of builtin scheme names
// "a" | "b" | "c", or objects {"name": ..., "design": <design>, "dof": q}),
// replications, seed, alpha, workers, estimator, failure_policy
// ("abort" | "drop"), format, out.
struct StudyFile {
    StudyConfig config;
    std::string format = "md";
    std::string out;
};
StudyFile study_from_json(const Json& j);

}  // namespace jkpanel
