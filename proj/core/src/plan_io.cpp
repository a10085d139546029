#include "gas/plan_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gas/error.hpp"
#include "gas/rle.hpp"

using nlohmann::json;

namespace gas {

std::string plan_to_json(const EditPlan& plan) {
    plan.validate();
    json doc;
    doc["source_prompt"] = plan.source_prompt;
    doc["target_prompt"] = plan.target_prompt;
    doc["latent_dims"] = {plan.union_mask.height(), plan.union_mask.width()};
    json subtasks = json::array();
    for (const Subtask& sub : plan.subtasks) {
        json entry;
        entry["source_phrase"] = sub.source_phrase;
        entry["target_phrase"] = sub.target_phrase;
        entry["mask_rle"] = rle_encode(sub.mask.bits());
        entry["preserve_form"] = sub.preserve_form;
        entry["penalty_eligible"] = sub.penalty_eligible;
        if (sub.box_px) {
            entry["box_px"] = {(*sub.box_px)[0], (*sub.box_px)[1], (*sub.box_px)[2],
                               (*sub.box_px)[3]};
        }
        subtasks.push_back(std::move(entry));
    }
    doc["subtasks"] = std::move(subtasks);
    return doc.dump(2) + "\n";
}

EditPlan plan_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("plan file is not valid JSON: ") + e.what(), text);
    }
    try {
        const int height = doc.at("latent_dims").at(0).get<int>();
        const int width = doc.at("latent_dims").at(1).get<int>();
        std::vector<Subtask> subtasks;
        for (const json& entry : doc.at("subtasks")) {
            Subtask sub;
            sub.source_phrase = entry.at("source_phrase").get<std::string>();
            sub.target_phrase = entry.at("target_phrase").get<std::string>();
            const auto runs = entry.at("mask_rle").get<std::vector<std::uint32_t>>();
            sub.mask = Mask::from_bits(height, width,
                                       rle_decode(runs, std::size_t(height) * width));
            sub.preserve_form = entry.at("preserve_form").get<bool>();
            sub.penalty_eligible = entry.at("penalty_eligible").get<bool>();
            if (entry.contains("box_px")) {
                sub.box_px = {entry["box_px"].at(0).get<double>(),
                              entry["box_px"].at(1).get<double>(),
                              entry["box_px"].at(2).get<double>(),
                              entry["box_px"].at(3).get<double>()};
            }
            subtasks.push_back(std::move(sub));
        }
        return make_edit_plan(doc.at("source_prompt").get<std::string>(),
                              doc.at("target_prompt").get<std::string>(), std::move(subtasks));
    } catch (const json::exception& e) {
        throw ParseError(std::string("plan file missing required fields: ") + e.what(), text);
    }
}

void save_plan(const std::string& path, const EditPlan& plan) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write plan file: " + path);
    out << plan_to_json(plan);
    if (!out) throw Error(ErrorCode::invalid_argument, "failed writing plan file: " + path);
}

EditPlan load_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open plan file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return plan_from_json(ss.str());
}

}  // namespace gas
