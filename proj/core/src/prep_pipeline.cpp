#include "gas/prep_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "gas/error.hpp"
#include "gas/prompts.hpp"

namespace gas {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_markdown_fences(const std::string& text) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).rfind("```", 0) == 0) continue;
        out << line << '\n';
    }
    return out.str();
}

void skip_ws(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

// Parses a bracketed list of quoted strings and/or bare integers starting at
// pos (which must point at '['). Quoted items may use either quote style.
struct ListItem {
    bool is_string = false;
    std::string text;
    long long number = 0;
};

std::vector<ListItem> parse_bracket_list(const std::string& s, std::size_t& pos,
                                         const std::string& raw) {
    if (pos >= s.size() || s[pos] != '[') throw ParseError("expected '[' to open a list", raw);
    ++pos;
    std::vector<ListItem> items;
    while (true) {
        skip_ws(s, pos);
        if (pos >= s.size()) throw ParseError("unterminated list", raw);
        if (s[pos] == ']') {
            ++pos;
            break;
        }
        ListItem item;
        if (s[pos] == '"' || s[pos] == '\'') {
            const char quote = s[pos];
            const std::size_t end = s.find(quote, pos + 1);
            if (end == std::string::npos) throw ParseError("unterminated quoted item", raw);
            item.is_string = true;
            item.text = s.substr(pos + 1, end - pos - 1);
            pos = end + 1;
        } else {
            std::size_t end = pos;
            while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) ||
                                      s[end] == '-' || s[end] == '+')) {
                ++end;
            }
            if (end == pos) throw ParseError("unquoted non-numeric list item", raw);
            item.number = std::stoll(s.substr(pos, end - pos));
            pos = end;
        }
        items.push_back(std::move(item));
        skip_ws(s, pos);
        if (pos < s.size() && s[pos] == ',') {
            ++pos;
        } else if (pos < s.size() && s[pos] == ']') {
            ++pos;
            break;
        } else if (pos >= s.size()) {
            throw ParseError("unterminated list", raw);
        } else {
            throw ParseError("expected ',' or ']' in list", raw);
        }
    }
    return items;
}

// Finds `key` (optionally quoted) after `from`, then parses the list that
// follows its colon.
std::vector<ListItem> parse_keyed_list(const std::string& s, const std::string& key,
                                       std::size_t from, const std::string& raw) {
    const std::size_t key_pos = s.find(key, from);
    if (key_pos == std::string::npos) {
        throw ParseError("missing '" + key + "' in final answer", raw);
    }
    std::size_t pos = key_pos + key.size();
    skip_ws(s, pos);
    if (pos < s.size() && (s[pos] == '"' || s[pos] == '\'')) ++pos;
    skip_ws(s, pos);
    if (pos >= s.size() || s[pos] != ':') {
        throw ParseError("expected ':' after '" + key + "'", raw);
    }
    ++pos;
    skip_ws(s, pos);
    return parse_bracket_list(s, pos, raw);
}

}  // namespace

void UserRequest::validate() const {
    if (request_text.empty()) {
        throw Error(ErrorCode::invalid_argument, "request text must be nonempty");
    }
    if (image.height <= 0 || image.width <= 0) {
        throw Error(ErrorCode::invalid_argument, "request image has empty dimensions");
    }
}

void PlanDraft::validate() const {
    if (source_list.size() != target_list.size() ||
        source_list.size() != preserve_form.size()) {
        throw Error(ErrorCode::malformed_plan,
                    "source_list, target_list and preserve_form lengths disagree");
    }
    if (source_list.size() < 2) {
        throw Error(ErrorCode::malformed_plan,
                    "draft needs at least one subtask plus the full sentence");
    }
    for (const std::string& s : source_list) {
        if (trim(s).empty()) throw Error(ErrorCode::malformed_plan, "empty source entry");
    }
    for (const std::string& s : target_list) {
        if (trim(s).empty()) throw Error(ErrorCode::malformed_plan, "empty target entry");
    }
    for (int flag : preserve_form) {
        if (flag != 0 && flag != 1) {
            throw Error(ErrorCode::malformed_plan, "preserve_form entries must be 0 or 1");
        }
    }
}

PlanDraft parse_plan_draft(const std::string& response_text) {
    const std::string text = strip_markdown_fences(response_text);
    const std::string lower = to_lower(text);
    const std::size_t anchor = lower.rfind("final answer");
    if (anchor == std::string::npos) {
        throw ParseError("response has no 'Final answer' block", response_text);
    }

    PlanDraft draft;
    const auto source = parse_keyed_list(text, "source_list", anchor, response_text);
    const auto target = parse_keyed_list(text, "target_list", anchor, response_text);
    const auto preserve = parse_keyed_list(text, "preserve_form", anchor, response_text);

    for (const ListItem& item : source) {
        if (!item.is_string) throw ParseError("source_list items must be strings", response_text);
        draft.source_list.push_back(item.text);
    }
    for (const ListItem& item : target) {
        if (!item.is_string) throw ParseError("target_list items must be strings", response_text);
        draft.target_list.push_back(item.text);
    }
    for (const ListItem& item : preserve) {
        draft.preserve_form.push_back(item.is_string ? std::stoi(item.text) : int(item.number));
    }

    draft.validate();
    return draft;
}

PlanDraft decompose_request(const UserRequest& request, ChatClient& chat) {
    request.validate();
    const std::string prompt = prompts::render_decomposition(request.request_text);
    const std::string response = chat.complete(prompt, request.image);
    return parse_plan_draft(response);
}

std::vector<std::string> parse_scenario(const std::string& response_text) {
    const std::string text = strip_markdown_fences(response_text);
    const std::string lower = to_lower(text);

    // Locate the "change = [" block; prose may mention "change" earlier, so
    // scan every occurrence for one followed by '=' then '['.
    std::size_t open = std::string::npos;
    for (std::size_t at = lower.find("change"); at != std::string::npos;
         at = lower.find("change", at + 1)) {
        std::size_t pos = at + 6;
        skip_ws(text, pos);
        if (pos >= text.size() || text[pos] != '=') continue;
        ++pos;
        skip_ws(text, pos);
        if (pos < text.size() && text[pos] == '[') {
            open = pos;
            break;
        }
    }
    if (open == std::string::npos) {
        throw ParseError("response has no 'change = [' block", response_text);
    }
    const std::size_t close = text.find(']', open);
    if (close == std::string::npos) {
        throw ParseError("unterminated 'change = [' block", response_text);
    }
    const std::string body = text.substr(open + 1, close - open - 1);

    std::vector<std::string> requests;
    std::string current;
    std::istringstream in(body);
    while (std::getline(in, current, '.')) {
        const std::string item = trim(current);
        if (item.empty()) continue;
        const std::string item_lower = to_lower(item);
        if (item_lower.rfind("change ", 0) != 0 ||
            item_lower.find(" into ") == std::string::npos) {
            throw ParseError("edit suggestion is not of the form 'change A into B': " + item,
                             response_text);
        }
        requests.push_back(item);
    }
    if (requests.size() != 3) {
        throw ParseError("expected exactly three edit suggestions, got " +
                             std::to_string(requests.size()),
                         response_text);
    }
    return requests;
}

std::vector<std::string> generate_scenario(const Image& image, ChatClient& chat) {
    const std::string response = chat.complete(prompts::scenario_template(), image);
    return parse_scenario(response);
}

std::vector<GroundingBox> ground_phrases(const Image& image,
                                         const std::vector<std::string>& phrases,
                                         DetectorClient& detector, double score_threshold) {
    if (phrases.empty()) {
        throw Error(ErrorCode::invalid_argument, "no phrases to ground");
    }

    // One detector call per distinct phrase; occurrence i takes the i-th best
    // box.
    std::map<std::string, std::vector<Detection>> ranked;
    std::map<std::string, std::size_t> taken;
    for (const std::string& phrase : phrases) {
        if (ranked.count(phrase)) continue;
        std::vector<Detection> dets = detector.detect(image, phrase);
        std::erase_if(dets, [&](const Detection& d) { return d.score < score_threshold; });
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
        ranked[phrase] = std::move(dets);
        taken[phrase] = 0;
    }

    std::vector<GroundingBox> boxes;
    boxes.reserve(phrases.size());
    for (const std::string& phrase : phrases) {
        std::vector<Detection>& dets = ranked[phrase];
        std::size_t& next = taken[phrase];
        if (next >= dets.size()) {
            throw Error(ErrorCode::grounding_failure,
                        "no detection above threshold for phrase '" + phrase + "'");
        }
        const Detection& d = dets[next++];
        GroundingBox box;
        box.x0 = std::clamp(d.box[0], 0.0, double(image.width));
        box.y0 = std::clamp(d.box[1], 0.0, double(image.height));
        box.x1 = std::clamp(d.box[2], 0.0, double(image.width));
        box.y1 = std::clamp(d.box[3], 0.0, double(image.height));
        box.score = d.score;
        box.phrase = phrase;
        if (!(box.x0 < box.x1 && box.y0 < box.y1) || box.score < 0.0 || box.score > 1.0) {
            throw Error(ErrorCode::grounding_failure,
                        "degenerate detection box for phrase '" + phrase + "'");
        }
        boxes.push_back(std::move(box));
    }
    return boxes;
}

Mask rasterize_mask(const GroundingBox& box, int px_height, int px_width, int latent_height,
                    int latent_width) {
    if (px_height <= 0 || px_width <= 0 || latent_height <= 0 || latent_width <= 0) {
        throw Error(ErrorCode::invalid_argument, "rasterize_mask: non-positive dimensions");
    }
    // Covered pixel range, half-open box in continuous pixel coordinates.
    const int py0 = std::clamp(int(std::floor(box.y0)), 0, px_height - 1);
    const int px0 = std::clamp(int(std::floor(box.x0)), 0, px_width - 1);
    const int py1 = std::clamp(int(std::ceil(box.y1)) - 1, 0, px_height - 1);
    const int px1 = std::clamp(int(std::ceil(box.x1)) - 1, 0, px_width - 1);
    if (py1 < py0 || px1 < px0) {
        throw Error(ErrorCode::grounding_failure,
                    "box for phrase '" + box.phrase + "' covers no pixels");
    }

    const auto cell_of = [](int pixel, int latent, int px) {
        return int((long long)(pixel)*latent / px);
    };
    const int cy0 = cell_of(py0, latent_height, px_height);
    const int cy1 = cell_of(py1, latent_height, px_height);
    const int cx0 = cell_of(px0, latent_width, px_width);
    const int cx1 = cell_of(px1, latent_width, px_width);

    Mask mask = Mask::rect(latent_height, latent_width, cy0, cx0, cy1 + 1, cx1 + 1);
    if (mask.area() == 0) {
        throw Error(ErrorCode::grounding_failure,
                    "box for phrase '" + box.phrase + "' vanished at latent resolution");
    }
    return mask;
}

EditPlan assemble_plan(const PlanDraft& draft, const std::vector<Mask>& masks,
                       const GasConfig& config, const std::vector<GroundingBox>& boxes) {
    draft.validate();
    config.validate();
    const int n = draft.subtask_count();
    if (int(masks.size()) != n) {
        throw Error(ErrorCode::invalid_argument,
                    "mask count does not match draft subtask count");
    }
    if (!boxes.empty() && int(boxes.size()) != n) {
        throw Error(ErrorCode::invalid_argument, "box count does not match draft subtask count");
    }

    std::vector<Subtask> subtasks;
    subtasks.reserve(n);
    for (int k = 0; k < n; ++k) {
        const Mask& mask = masks[k];
        if (mask.area() == 0) {
            throw Error(ErrorCode::degenerate_plan,
                        "empty mask for subtask '" + draft.source_list[k] + "'");
        }
        Subtask sub;
        sub.source_phrase = draft.source_list[k];
        sub.target_phrase = draft.target_list[k];
        sub.mask = mask;
        sub.preserve_form = draft.preserve_form[k] == 1;
        const double ratio = double(mask.area()) / double(mask.size());
        sub.penalty_eligible = ratio < config.area_threshold;
        if (!boxes.empty()) {
            sub.box_px = {boxes[k].x0, boxes[k].y0, boxes[k].x1, boxes[k].y1};
        }
        subtasks.push_back(std::move(sub));
    }
    return make_edit_plan(draft.source_prompt(), draft.target_prompt(), std::move(subtasks));
}

}  // namespace gas
