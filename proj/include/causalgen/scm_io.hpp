#pragma once

#include <string>

#include <json.hpp>

#include "causalgen/scm.hpp"

namespace causalgen {

// On-disk SCM description:
// {
//   "format_version": 1,
//   "graph": {"nodes": ["A", ...], "edges": [["A","B"], ...]},
//   "mechanisms": {
//     "A": {"type": "discrete_table", "p1": [0.3], "invert_exo": false},
//     "B": {"type": "cubic", "coeffs": [...], "squash": true},
//     "C": {"type": "constant", "value": 1}
//   },
//   "exogenous": {"A": {"dist": "uniform"}, "B": {"dist": "bernoulli", "p": 0.5}}
// }
// "exogenous" is optional and defaults every node to Uniform[0,1].
nlohmann::ordered_json scm_to_json(const Scm& scm);
Scm scm_from_json(const nlohmann::json& j);

Scm load_scm(const std::string& path);
void save_scm(const Scm& scm, const std::string& path);

}  // namespace causalgen
