#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gas/mask.hpp"

namespace gas {

// One attribute edit: replace source_phrase with target_phrase inside mask.
struct Subtask {
    std::string source_phrase;
    std::string target_phrase;
    Mask mask;
    bool preserve_form = false;
    bool penalty_eligible = false;
    // Detector box in pixel coordinates when the mask came from grounding.
    std::optional<std::array<double, 4>> box_px;
};

// A full multi-attribute edit: the complete source/target sentences plus the
// ordered subtasks and the union of their masks (the only region the total
// gradient may touch).
struct EditPlan {
    std::string source_prompt;
    std::string target_prompt;
    std::vector<Subtask> subtasks;
    Mask union_mask;

    // Recomputes the union from the subtask masks.
    void rebuild_union();

    // Throws Error(invalid_argument / degenerate_plan) if any structural
    // invariant is broken: empty subtask list, empty phrases, shape
    // mismatches, union not equal to the OR of subtask masks, or a zero-area
    // union.
    void validate() const;
};

// Convenience constructor that fills the union mask and validates.
EditPlan make_edit_plan(std::string source_prompt, std::string target_prompt,
                        std::vector<Subtask> subtasks);

}  // namespace gas
