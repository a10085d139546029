#pragma once

#include <string>
#include <vector>

#include "gas/clients.hpp"
#include "gas/edit_plan.hpp"
#include "gas/grad_engine.hpp"
#include "gas/image.hpp"

namespace gas {

struct UserRequest {
    Image image;
    std::string request_text;

    void validate() const;
};

// Decomposition draft. source_list / target_list hold one phrase per subtask
// followed by the full sentence; preserve_form holds one flag per subtask
// followed by the whole-scene flag.
struct PlanDraft {
    std::vector<std::string> source_list;
    std::vector<std::string> target_list;
    std::vector<int> preserve_form;

    int subtask_count() const { return int(source_list.size()) - 1; }
    const std::string& source_prompt() const { return source_list.back(); }
    const std::string& target_prompt() const { return target_list.back(); }

    void validate() const;
};

struct GroundingBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double score = 0.0;
    std::string phrase;
};

// Sends the decomposition instruction block plus the image, then parses the
// "Final answer" arrays out of the reply. Tolerates markdown fences and
// either quote style; anything else is a hard parse error carrying the raw
// reply. A length disagreement between the arrays is a malformed-plan error.
PlanDraft decompose_request(const UserRequest& request, ChatClient& chat);

// Parser behind decompose_request, exposed for fixture and fuzz tests.
PlanDraft parse_plan_draft(const std::string& response_text);

// Asks the model for exactly three "change A into B" edit requests for the
// image and parses the "change = [...]" block.
std::vector<std::string> generate_scenario(const Image& image, ChatClient& chat);
std::vector<std::string> parse_scenario(const std::string& response_text);

// Grounds each phrase occurrence to one box. A phrase appearing j times gets
// its j highest-scoring detections in descending score order; too few
// detections above score_threshold is a grounding failure naming the phrase.
std::vector<GroundingBox> ground_phrases(const Image& image,
                                         const std::vector<std::string>& phrases,
                                         DetectorClient& detector,
                                         double score_threshold = 0.25);

// Rasterizes a pixel box to latent resolution with the any-coverage rule: a
// latent cell is set when any covered pixel maps into it, so small objects
// survive downsampling.
Mask rasterize_mask(const GroundingBox& box, int px_height, int px_width, int latent_height,
                    int latent_width);

// Builds the final plan: union mask, penalty eligibility from the mask-area
// ratio against config.area_threshold, preserve flags copied from the draft.
// Any zero-area mask is a degenerate-plan error. boxes, when provided, are
// attached per subtask for provenance.
EditPlan assemble_plan(const PlanDraft& draft, const std::vector<Mask>& masks,
                       const GasConfig& config, const std::vector<GroundingBox>& boxes = {});

}  // namespace gas
