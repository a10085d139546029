#pragma once

#include <string>

namespace gas::prompts {

// Instruction block asking the vision-language model to propose exactly three
// edits for an image, in the machine-parseable
// "change = [change A into B. ...]" format. The image rides alongside as a
// separate message part.
const std::string& scenario_template();

// Chain-of-thought instruction block that decomposes an edit request into
// 'source_list' / 'target_list' / 'preserve_form' arrays, with three worked
// examples. Contains one substitution slot, "Requests:{responses}".
const std::string& decomposition_template();

// decomposition_template() with the user's request text substituted.
std::string render_decomposition(const std::string& requests);

}  // namespace gas::prompts
