#include <doctest.h>

#include <random>
#include <thread>

#include "gas/error.hpp"
#include "gas/prep_pipeline.hpp"
#include "gas/prompts.hpp"
#include "test_support.hpp"

using namespace gas;

namespace {

Image tiny_image(int h = 16, int w = 16, std::uint8_t seed = 1) {
    Image img;
    img.height = h;
    img.width = w;
    img.rgb.resize(std::size_t(h) * w * 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = std::uint8_t((i * seed) % 256);
    return img;
}

// The worked dog/car/dirt decomposition as an assistant would phrase it.
const char* kExampleOneResponse = R"(Explanation:
The things requested to be changed in the image are a dog, a car and the dirt in the order requested. Image can be described with the things as "a dog running in front of a car on the dirt.". The requested changes are to change a dog into a cat, a car into a Lego car, and the dirt into the asphalt road. The dog and the cat can take similar overall poses, so the shape is maintained; the car and the scene are not forced to keep their shape.
Final answer:
'source_list': ["a dog", "a car", "the dirt", "A dog is running in front of a car on the dirt."]
'target_list': ["a cat", "a Lego car", "the asphalt road", "A cat is running in front of a Lego car on the asphalt road."]
'preserve_form': [1, 0, 0, 0]
)";

const std::vector<std::string> kExampleOneSource = {
    "a dog", "a car", "the dirt", "A dog is running in front of a car on the dirt."};
const std::vector<std::string> kExampleOneTarget = {
    "a cat", "a Lego car", "the asphalt road",
    "A cat is running in front of a Lego car on the asphalt road."};
const std::vector<int> kExampleOnePreserve = {1, 0, 0, 0};

}  // namespace

TEST_CASE("prompt templates carry the substitution slot") {
    CHECK(prompts::decomposition_template().find("Requests:{responses}") != std::string::npos);
    const std::string rendered = prompts::render_decomposition("Change a dog into a cat.");
    CHECK(rendered.find("Requests:Change a dog into a cat.") != std::string::npos);
    CHECK(rendered.find("{responses}") == std::string::npos);
    CHECK(prompts::scenario_template().find(
              "change = [change A into B. change C into D. change E into F.]") !=
          std::string::npos);
}

TEST_CASE("plan draft parsing: worked example") {
    const PlanDraft draft = parse_plan_draft(kExampleOneResponse);
    CHECK(draft.source_list == kExampleOneSource);
    CHECK(draft.target_list == kExampleOneTarget);
    CHECK(draft.preserve_form == kExampleOnePreserve);
    CHECK(draft.subtask_count() == 3);
    CHECK(draft.source_prompt() == kExampleOneSource.back());
}

TEST_CASE("plan draft parsing tolerates fences and either quote style") {
    SUBCASE("markdown fences") {
        const std::string fenced = std::string("```\n") + kExampleOneResponse + "```\n";
        const PlanDraft draft = parse_plan_draft(fenced);
        CHECK(draft.source_list == kExampleOneSource);
    }
    SUBCASE("double-quoted keys, single-quoted items") {
        const char* variant = R"(Final answer:
"source_list": ['a dog', 'a car', 'the dirt', 'A dog is running in front of a car on the dirt.']
"target_list": ['a cat', 'a Lego car', 'the asphalt road', 'A cat is running in front of a Lego car on the asphalt road.']
"preserve_form": [1, 0, 0, 0]
)";
        const PlanDraft draft = parse_plan_draft(variant);
        CHECK(draft.source_list == kExampleOneSource);
        CHECK(draft.target_list == kExampleOneTarget);
    }
    SUBCASE("quoted preserve flags") {
        const char* variant = R"(Final answer:
source_list: ["a dog", "The dog runs."]
target_list: ["a cat", "The cat runs."]
preserve_form: ["1", "0"]
)";
        const PlanDraft draft = parse_plan_draft(variant);
        CHECK(draft.preserve_form == std::vector<int>{1, 0});
    }
}

TEST_CASE("plan draft parsing error taxonomy") {
    SUBCASE("missing preserve_form is a parse error with the raw text attached") {
        const char* missing = R"(Final answer:
'source_list': ["a dog", "The dog runs."]
'target_list': ["a cat", "The cat runs."]
)";
        CHECK_THROWS_AS(parse_plan_draft(missing), ParseError);
        try {
            parse_plan_draft(missing);
        } catch (const ParseError& e) {
            CHECK(e.raw_text() == missing);
        }
    }
    SUBCASE("length disagreement is a malformed-plan error") {
        const char* mismatched = R"(Final answer:
'source_list': ["a dog", "a car", "The scene."]
'target_list': ["a cat", "The scene, edited."]
'preserve_form': [1, 0, 0]
)";
        try {
            parse_plan_draft(mismatched);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::malformed_plan);
        }
    }
    SUBCASE("no final answer block") {
        CHECK_THROWS_AS(parse_plan_draft("I cannot help with that."), ParseError);
    }
    SUBCASE("invalid preserve flags") {
        const char* bad_flags = R"(Final answer:
'source_list': ["a dog", "The dog runs."]
'target_list': ["a cat", "The cat runs."]
'preserve_form': [1, 7]
)";
        try {
            parse_plan_draft(bad_flags);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::malformed_plan);
        }
    }
}

TEST_CASE("plan draft parser never yields an invariant-violating draft under fuzzing") {
    std::mt19937 rng(2024);
    const std::string base = kExampleOneResponse;
    int parsed_ok = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::string mutated = base;
        const int mutations = 1 + int(rng() % 4);
        for (int m = 0; m < mutations; ++m) {
            switch (rng() % 6) {
                case 0:  // flip one character
                    mutated[rng() % mutated.size()] = char('!' + rng() % 90);
                    break;
                case 1:  // delete one character
                    mutated.erase(rng() % mutated.size(), 1);
                    break;
                case 2:  // insert noise
                    mutated.insert(rng() % mutated.size(), std::string(1, char('!' + rng() % 90)));
                    break;
                case 3:  // truncate the tail
                    mutated.resize(mutated.size() / 2 + rng() % (mutated.size() / 2));
                    break;
                case 4:  // wrap in fences (still parseable)
                    mutated = "```json\n" + mutated + "\n```";
                    break;
                case 5: {  // swap a quote character
                    const std::size_t pos = rng() % mutated.size();
                    if (mutated[pos] == '"') mutated[pos] = '\'';
                    else if (mutated[pos] == '\'') mutated[pos] = '"';
                    break;
                }
            }
        }
        try {
            const PlanDraft draft = parse_plan_draft(mutated);
            draft.validate();  // a returned draft must satisfy every invariant
            ++parsed_ok;
        } catch (const Error&) {
            // rejection is the acceptable alternative
        }
    }
    // The fence-only mutations keep many inputs valid; make sure the fuzz run
    // exercised both outcomes.
    CHECK(parsed_ok > 0);
    CHECK(parsed_ok < 200);
}

TEST_CASE("decompose_request drives the chat client with the rendered template") {
    const Image img = tiny_image();
    std::string captured_prompt;
    ScriptedChatClient chat([&](const std::string& prompt, const Image&) {
        captured_prompt = prompt;
        return std::string(kExampleOneResponse);
    });
    UserRequest request{img,
                        "Change a dog into a cat. Change a car into a Lego car. Change the dirt "
                        "into the asphalt road."};
    const PlanDraft draft = decompose_request(request, chat);
    CHECK(draft.source_list == kExampleOneSource);
    CHECK(draft.preserve_form == kExampleOnePreserve);
    CHECK(captured_prompt.find(request.request_text) != std::string::npos);
    CHECK(captured_prompt.find("{responses}") == std::string::npos);

    UserRequest empty{img, ""};
    CHECK_THROWS_AS(decompose_request(empty, chat), Error);
}

TEST_CASE("scenario parsing") {
    SUBCASE("three well-formed suggestions") {
        const auto requests = parse_scenario(
            "change = [change a cat into a dog. change a black car into a red car. change grass "
            "into snow.]");
        REQUIRE(requests.size() == 3);
        CHECK(requests[0] == "change a cat into a dog");
        CHECK(requests[1] == "change a black car into a red car");
        CHECK(requests[2] == "change grass into snow");
    }
    SUBCASE("prose before the block is tolerated") {
        const auto requests = parse_scenario(
            "Sure! I reviewed the photo and found three changes worth making.\n"
            "change = [change a cat into a dog. change a black car into a red car. change grass "
            "into snow.]\nLet me know if you need more.");
        REQUIRE(requests.size() == 3);
        CHECK(requests[2] == "change grass into snow");
    }
    SUBCASE("empty bracket fails") {
        CHECK_THROWS_AS(parse_scenario("change = []"), ParseError);
    }
    SUBCASE("wrong count fails") {
        CHECK_THROWS_AS(parse_scenario("change = [change a cat into a dog. change grass into "
                                       "snow.]"),
                        ParseError);
    }
    SUBCASE("malformed suggestion fails") {
        CHECK_THROWS_AS(
            parse_scenario("change = [make the sky cloudy. change a cat into a dog. change grass "
                           "into snow.]"),
            ParseError);
    }
    SUBCASE("frozen fixture replay") {
        const Image img = tiny_image();
        const std::string dir = test_support::scratch_dir("scenario-fixture");
        const std::string canned =
            "Here are my suggestions.\nchange = [change a wooden bench into a stone bench. "
            "change the green bush into a flowering bush. change a gray path into a brick "
            "path.]\n";
        write_chat_fixture(dir, prompts::scenario_template(), img, canned);
        ReplayChatClient chat(dir);
        const auto requests = generate_scenario(img, chat);
        REQUIRE(requests.size() == 3);
        CHECK(requests[0] == "change a wooden bench into a stone bench");
    }
}

TEST_CASE("ground_phrases ranks repeated phrases by score") {
    const Image img = tiny_image();
    ScriptedDetectorClient detector([](const Image&, const std::string& caption) {
        std::vector<Detection> dets;
        if (caption == "a cat") {
            dets.push_back({{0.0, 0.0, 4.0, 4.0}, 0.70});
            dets.push_back({{8.0, 8.0, 12.0, 12.0}, 0.95});
            dets.push_back({{4.0, 4.0, 6.0, 6.0}, 0.40});
        }
        return dets;
    });

    const auto boxes = ground_phrases(img, {"a cat", "a cat"}, detector, 0.25);
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[0].score == 0.95);
    CHECK(boxes[0].x0 == 8.0);
    CHECK(boxes[1].score == 0.70);
    CHECK(boxes[1].x0 == 0.0);
    CHECK(boxes[0].phrase == "a cat");

    // A fourth occurrence outruns the three detections above threshold.
    CHECK_THROWS_AS(ground_phrases(img, {"a cat", "a cat", "a cat", "a cat"}, detector, 0.25),
                    Error);
    // Raising the threshold to 0.5 leaves only two usable detections.
    CHECK_THROWS_AS(ground_phrases(img, {"a cat", "a cat", "a cat"}, detector, 0.5), Error);
    try {
        ground_phrases(img, {"a dog"}, detector, 0.25);
        FAIL("expected grounding failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::grounding_failure);
        CHECK(std::string(e.what()).find("a dog") != std::string::npos);
    }
}

TEST_CASE("ground_phrases single fixed box") {
    const Image img = tiny_image();
    ScriptedDetectorClient detector([](const Image&, const std::string&) {
        return std::vector<Detection>{{{0.0, 0.0, 10.0, 10.0}, 0.9}};
    });
    const auto boxes = ground_phrases(img, {"anything"}, detector);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].x1 == 10.0);
    CHECK(boxes[0].y1 == 10.0);
    CHECK(boxes[0].score == 0.9);
}

TEST_CASE("rasterize_mask any-coverage rule") {
    SUBCASE("full-image box becomes an all-ones mask") {
        GroundingBox box{0, 0, 64, 64, 0.9, "all"};
        const Mask m = rasterize_mask(box, 64, 64, 8, 8);
        CHECK(m.area() == 64);
    }
    SUBCASE("single top-left pixel survives 8x downsampling") {
        GroundingBox box{0, 0, 1, 1, 0.9, "dot"};
        const Mask m = rasterize_mask(box, 64, 64, 8, 8);
        CHECK(m.area() == 1);
        CHECK(m.at(0, 0));
    }
    SUBCASE("pixel box (16,16,32,32) maps to the 2x2 latent block at rows/cols 2-3") {
        GroundingBox box{16, 16, 32, 32, 0.9, "block"};
        const Mask m = rasterize_mask(box, 64, 64, 8, 8);

        // Brute-force oracle: mark every latent cell hit by a covered pixel.
        Mask expected(8, 8, 0);
        for (int py = 16; py < 32; ++py) {
            for (int px = 16; px < 32; ++px) {
                expected.set(py * 8 / 64, px * 8 / 64, true);
            }
        }
        CHECK(m == expected);
        CHECK(m.area() == 4);
        CHECK(m.at(2, 2));
        CHECK(m.at(3, 3));
        CHECK(!m.at(1, 2));
        CHECK(!m.at(4, 3));
    }
    SUBCASE("fractional boxes still cover every touched cell") {
        GroundingBox box{15.2, 15.9, 16.4, 16.1, 0.9, "frac"};
        const Mask m = rasterize_mask(box, 64, 64, 8, 8);
        Mask expected(8, 8, 0);
        for (int py = 15; py <= 16; ++py) {
            for (int px = 15; px <= 16; ++px) expected.set(py * 8 / 64, px * 8 / 64, true);
        }
        CHECK(m == expected);
    }
    SUBCASE("non-divisible dimensions") {
        GroundingBox box{0, 0, 3, 3, 0.9, "odd"};
        const Mask m = rasterize_mask(box, 10, 10, 3, 3);
        // Pixels 0-2 of 10 map to cell 0 only (cell width 10/3).
        CHECK(m.area() == 1);
        CHECK(m.at(0, 0));
    }
}

TEST_CASE("assemble_plan applies the area-threshold eligibility rule") {
    GasConfig cfg;  // area_threshold 0.15
    PlanDraft draft;
    draft.source_list = {"a bird", "the field", "A bird over the field."};
    draft.target_list = {"a kite", "the lake", "A kite over the lake."};
    draft.preserve_form = {1, 0, 0};

    // 10x10 latent: areas 10 (10%) and 40 (40%).
    const Mask small = Mask::rect(10, 10, 0, 0, 1, 10);
    const Mask big = Mask::rect(10, 10, 4, 0, 8, 10);
    const EditPlan plan = assemble_plan(draft, {small, big}, cfg);

    REQUIRE(plan.subtasks.size() == 2);
    CHECK(plan.subtasks[0].penalty_eligible);
    CHECK_FALSE(plan.subtasks[1].penalty_eligible);
    CHECK(plan.subtasks[0].preserve_form);
    CHECK_FALSE(plan.subtasks[1].preserve_form);
    CHECK(plan.source_prompt == "A bird over the field.");
    CHECK(plan.target_prompt == "A kite over the lake.");
    CHECK(plan.union_mask.area() == 50);
}

TEST_CASE("assemble_plan union arithmetic and degenerate masks") {
    GasConfig cfg;
    PlanDraft draft;
    draft.source_list = {"a", "b", "scene"};
    draft.target_list = {"a2", "b2", "scene2"};
    draft.preserve_form = {0, 0, 0};

    SUBCASE("disjoint masks: union area adds") {
        const Mask m1 = Mask::rect(6, 6, 0, 0, 1, 5);  // area 5
        const Mask m2 = Mask::rect(6, 6, 2, 0, 3, 7);  // row 2, clamped to 6 cols: area 7 -> 6
        const EditPlan plan = assemble_plan(draft, {m1, m2}, cfg);
        CHECK(plan.union_mask.area() == m1.area() + m2.area());
        CHECK(plan.union_mask.area() == 11);
    }
    SUBCASE("overlapping masks: inclusion-exclusion") {
        const Mask a = Mask::rect(8, 8, 0, 0, 1, 5);  // area 5, columns 0-4
        const Mask b = Mask::rect(8, 8, 0, 2, 1, 9);  // area 6, columns 2-7
        const EditPlan plan = assemble_plan(draft, {a, b}, cfg);
        // Three shared cells (columns 2-4): union = 5 + 6 - 3.
        CHECK(plan.union_mask.area() == 8);
    }
    SUBCASE("zero-area mask is a degenerate plan") {
        try {
            assemble_plan(draft, {Mask(6, 6, 0), Mask::rect(6, 6, 0, 0, 2, 2)}, cfg);
            FAIL("expected degenerate plan");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::degenerate_plan);
        }
    }
    SUBCASE("mask count mismatch") {
        CHECK_THROWS_AS(assemble_plan(draft, {Mask(6, 6, 1)}, cfg), Error);
    }
}

TEST_CASE("concurrent cache writers never corrupt an entry") {
    const Image img = tiny_image();
    const std::string dir = test_support::scratch_dir("cache-race");
    auto inner = std::make_shared<ScriptedChatClient>(
        [](const std::string&, const Image&) { return std::string(2000, 'r'); });

    std::vector<std::thread> writers;
    for (int i = 0; i < 8; ++i) {
        writers.emplace_back([&, i] {
            CachingChatClient cached(dir, inner);
            for (int j = 0; j < 10; ++j) {
                // Half the threads hammer one shared key, half use their own.
                const std::string prompt = (i % 2 == 0) ? "shared" : "own-" + std::to_string(i);
                CHECK(cached.complete(prompt, img) == std::string(2000, 'r'));
            }
        });
    }
    for (std::thread& t : writers) t.join();

    ReplayChatClient replay(dir);
    CHECK(replay.complete("shared", img) == std::string(2000, 'r'));
    CHECK(replay.complete("own-1", img) == std::string(2000, 'r'));
}

TEST_CASE("caching and replay clients") {
    const Image img = tiny_image();
    const std::string dir = test_support::scratch_dir("chat-cache");

    int live_calls = 0;
    auto inner = std::make_shared<ScriptedChatClient>([&](const std::string&, const Image&) {
        ++live_calls;
        return std::string("canned response");
    });
    CachingChatClient cached(dir, inner);
    CHECK(cached.complete("prompt-a", img) == "canned response");
    CHECK(cached.complete("prompt-a", img) == "canned response");
    CHECK(live_calls == 1);  // second call served from disk

    // The cache directory is a valid replay fixture set.
    ReplayChatClient replay(dir);
    CHECK(replay.complete("prompt-a", img) == "canned response");
    CHECK_THROWS_AS(replay.complete("prompt-b", img), BackendError);

    const std::string det_dir = test_support::scratch_dir("det-cache");
    int det_calls = 0;
    auto det_inner =
        std::make_shared<ScriptedDetectorClient>([&](const Image&, const std::string&) {
            ++det_calls;
            return std::vector<Detection>{{{1.0, 2.0, 3.0, 4.0}, 0.5}};
        });
    CachingDetectorClient det_cached(det_dir, det_inner);
    const auto first = det_cached.detect(img, "a cat");
    const auto second = det_cached.detect(img, "a cat");
    CHECK(det_calls == 1);
    REQUIRE(first.size() == 1);
    CHECK(first[0].box == second[0].box);
    CHECK(first[0].score == second[0].score);

    ReplayDetectorClient det_replay(det_dir);
    const auto replayed = det_replay.detect(img, "a cat");
    REQUIRE(replayed.size() == 1);
    CHECK(replayed[0].box == first[0].box);
    CHECK_THROWS_AS(det_replay.detect(img, "a dog"), BackendError);
}
