#pragma once

#include <string>

#include "gas/edit_plan.hpp"

namespace gas {

// Canonical plan file: JSON with alphabetically ordered keys, two-space
// indentation and a trailing newline, so serialize(parse(s)) == s for any
// canonical s. Masks are run-length encoded row-major.
std::string plan_to_json(const EditPlan& plan);
EditPlan plan_from_json(const std::string& text);

void save_plan(const std::string& path, const EditPlan& plan);
EditPlan load_plan(const std::string& path);

}  // namespace gas
