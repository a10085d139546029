#include "gas/edit_plan.hpp"

#include <utility>

#include "gas/error.hpp"

namespace gas {

void EditPlan::rebuild_union() {
    std::vector<Mask> masks;
    masks.reserve(subtasks.size());
    for (const Subtask& s : subtasks) masks.push_back(s.mask);
    union_mask = Mask::union_of(masks);
}

void EditPlan::validate() const {
    if (subtasks.empty()) {
        throw Error(ErrorCode::invalid_argument, "plan has no subtasks");
    }
    for (const Subtask& s : subtasks) {
        if (s.source_phrase.empty() || s.target_phrase.empty()) {
            throw Error(ErrorCode::invalid_argument, "subtask phrases must be nonempty");
        }
        if (!s.mask.same_shape(union_mask)) {
            throw Error(ErrorCode::invalid_argument, "subtask mask shape mismatch");
        }
    }
    std::vector<Mask> masks;
    masks.reserve(subtasks.size());
    for (const Subtask& s : subtasks) masks.push_back(s.mask);
    if (!(Mask::union_of(masks) == union_mask)) {
        throw Error(ErrorCode::invalid_argument, "union mask is not the OR of subtask masks");
    }
    if (union_mask.area() == 0) {
        throw Error(ErrorCode::degenerate_plan, "plan union mask has zero area");
    }
}

EditPlan make_edit_plan(std::string source_prompt, std::string target_prompt,
                        std::vector<Subtask> subtasks) {
    EditPlan plan;
    plan.source_prompt = std::move(source_prompt);
    plan.target_prompt = std::move(target_prompt);
    plan.subtasks = std::move(subtasks);
    if (plan.subtasks.empty()) {
        throw Error(ErrorCode::invalid_argument, "plan has no subtasks");
    }
    plan.rebuild_union();
    plan.validate();
    return plan;
}

}  // namespace gas
