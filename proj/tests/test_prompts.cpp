// SPDX-License-Identifier: Apache-2.0
#include "realign/errors.hpp"
#include "realign/prompts.hpp"
#include "realign/util.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace realign;
using realign::test::golden_path;
using realign::test::turns_to_text;

namespace {

const std::string kKitchenCaption =
    "The image showcases a clean and well-organized kitchen with wooden floors and wooden "
    "cabinets. The kitchen features a white refrigerator, a sink with a window above it, and a "
    "stove with an oven below it. Additionally, there is a dishwasher and a washing machine in "
    "the kitchen. The appliances are neatly arranged, and the overall appearance of the kitchen "
    "is tidy and inviting.";

const std::string kLaptopCaption =
    "In the image, there are two women sitting at a table, both focused on their laptops. One of "
    "the women is holding up her middle finger, possibly as a gesture of defiance or humor. On "
    "the table, there is a bottle, a cup, and a laptop being used by one of the women. The woman "
    "with the laptop is wearing a scarf, and the other woman is positioned on the other side of "
    "the table. Drink: A clear plastic bottle of water is on the table. It is placed in front of "
    "the woman with the laptop. Laptop: The laptop is a black and silver Dell computer. The "
    "woman is using it while sitting at the table. Table: The table is a dining table where the "
    "woman is sitting with her laptop and a bottle of water.Bottle: The bottle is a clear "
    "plastic bottle of water. It is placed on the table in front of the woman with the laptop.";

} // namespace

TEST_CASE("golden: rewrite chat render matches the transcribed fixture") {
    const auto lib = PromptLibrary::builtin().canonical_only();
    const std::string chosen =
        "[{'id':0, 'category name':'Home appliance', 'box':[0.68, 0.52, 0.15, 0.05]}, "
        "{'id':1, 'category name':'Home appliance', 'box':[0.0, 0.26, 0.24, 0.74]}, "
        "{'id':2, 'category name':'Home appliance', 'box':[0.53, 0.56, 0.14, 0.28]}, "
        "{'id':3, 'category name':'Home appliance', 'box':[0.68, 0.22, 0.15, 0.06]}, "
        "{'id':4, 'category name':'Home appliance', 'box':[0.67, 0.57, 0.16, 0.21]}]";
    const auto turns = lib.render_chat(
        "Rewrite", {{"caption", kKitchenCaption},
                    {"chosen_object", chosen},
                    {"other_object", "[]"},
                    {"object_description",
                     "'appliance for cleaning dishes with water and detergent'"}});
    CHECK(turns_to_text(turns) == read_file(golden_path("rewrite_chat.txt")));
    CHECK(validate_turns(turns).empty());

    // the final user block carries the example's object description verbatim
    CHECK(turns.back().content.find(
              "Object Description: 'appliance for cleaning dishes with water and detergent'") !=
          std::string::npos);
}

TEST_CASE("golden: the chosen-object formatter reproduces the fixture syntax") {
    std::vector<std::pair<std::string, NormalizedBox>> objects = {
        {"Home appliance", {0.68, 0.52, 0.15, 0.05}},
        {"Home appliance", {0.0, 0.26, 0.24, 0.74}},
    };
    CHECK(format_object_list(objects) ==
          "[{'id':0, 'category name':'Home appliance', 'box':[0.68, 0.52, 0.15, 0.05]}, "
          "{'id':1, 'category name':'Home appliance', 'box':[0.0, 0.26, 0.24, 0.74]}]");
    CHECK(format_object_list({}) == "[]");
}

TEST_CASE("golden: reflection chat render matches the transcribed fixture") {
    const auto lib = PromptLibrary::builtin().canonical_only();
    const auto turns = lib.render_chat("Reflection",
                                       {{"category", "Laptop"},
                                        {"caption", kLaptopCaption},
                                        {"phrase", "'black and silver Dell computer'"}});
    CHECK(turns_to_text(turns) == read_file(golden_path("reflection_chat.txt")));
}

TEST_CASE("golden: synonym chat render matches the transcribed fixture") {
    const auto lib = PromptLibrary::builtin().canonical_only();
    const auto turns = lib.render_chat(
        "Synonym",
        {{"expression",
          "home appliances of refrigerator, sink, stove, dishwasher and washing machine"}});
    CHECK(turns_to_text(turns) == read_file(golden_path("synonym_chat.txt")));
    REQUIRE(turns.size() == 2);  // system + sole user message, no examples
}

TEST_CASE("golden: finetune prompts match the transcribed fixtures") {
    const auto lib = PromptLibrary::builtin().canonical_only();
    const std::string reasoning =
        "The phrase \"a book with the word 'Fix' on it\" describes the target category of 'book' "
        "and provides extra information that the word \"Fix\" is on the book. However, the "
        "caption does not mention any specific word on the book, so extra information is needed "
        "to determine if the phrase is correct.";
    const std::string conclusion =
        "The phrase is uncertain. The caption does not mention any specific word on the book, so "
        "it is unclear if the phrase is correct or not.";
    const auto qg = lib.render_chat("FinetuneQuestionGen",
                                    {{"phrase", "\"a book with the word 'Fix' on it\""},
                                     {"reasoning", reasoning},
                                     {"conclusion", conclusion}});
    CHECK(turns_to_text(qg) == read_file(golden_path("finetune_questiongen_chat.txt")));

    const auto ta = lib.render_chat(
        "FinetuneTargetArea",
        {{"phrase", "'bread loaf on a tan bowl'"},
         {"reasoning",
          "The phrase describes a large tan colored bowl with a bread loaf sitting in it. "
          "However, the caption does not mention the color or the presence of food in the bowl. "
          "The size of the bowl is also not mentioned."},
         {"conclusion",
          "The phrase is uncertain. The color of the bowl, the presence of food and the size of "
          "the bowl are not mentioned in the caption."},
         {"questions",
          "1. What is the color of the bowl?\n2. Is there any food in the bowl? If so, what type "
          "of food is in the bowl?\n3. What is the size of the bowl? Is it small or large?"}});
    CHECK(turns_to_text(ta) == read_file(golden_path("finetune_targetarea_chat.txt")));
}

TEST_CASE("golden: vlm tool prompt is a byte-exact instantiation") {
    const std::string rendered = render_vlm_tool_prompt(
        "book", "a book with the word 'Fix' on it", {"Is there any specific word on the book?"});
    CHECK(rendered + "\n" == read_file(golden_path("vlm_tool_prompt.txt")));
}

TEST_CASE("golden: raw generation templates") {
    const auto lib = PromptLibrary::builtin();
    std::string joined;
    for (const auto& id : kRawGenIds) {
        const auto& t = lib.get(id);
        CHECK(t.placeholders == std::vector<std::string>{"image", "object", "boxes"});
        CHECK(t.system_text.empty());
        CHECK(t.examples.empty());
        joined += t.user_format + "\n";
    }
    CHECK(joined == read_file(golden_path("raw_generation_prompts.txt")));
}

TEST_CASE("vlm tool prompt requires questions and preserves newlines") {
    CHECK_THROWS_AS(render_vlm_tool_prompt("book", "a book", {}), UsageError);
    const std::string rendered =
        render_vlm_tool_prompt("mug", "a mug\non a desk", {"Q1?", "Q2?"});
    CHECK(rendered.find("a mug\non a desk") != std::string::npos);  // verbatim, no escaping
    CHECK(rendered.find("Q1? Q2?") != std::string::npos);
}

TEST_CASE("missing bindings are reported by placeholder name") {
    const auto lib = PromptLibrary::builtin();
    try {
        lib.render_chat("Rewrite", {{"caption", "c"},
                                    {"chosen_object", "[]"},
                                    {"object_description", "'d'"}});
        FAIL("expected MissingBinding");
    } catch (const MissingBinding& e) {
        CHECK(e.placeholder() == "other_object");
    }
    CHECK_THROWS_AS(lib.render_chat("NoSuchTemplate", {}), UnknownTemplate);
}

TEST_CASE("each canonical table ships five in-context examples") {
    const auto lib = PromptLibrary::builtin();
    for (const char* id : {"Rewrite", "Reflection", "FinetuneQuestionGen", "FinetuneTargetArea"}) {
        const auto& t = lib.get(id);
        CHECK(t.examples.size() == 5);
        CHECK_FALSE(t.examples[0].supplemental);  // the transcribed one leads
        int supplemental = 0;
        for (const auto& e : t.examples) supplemental += e.supplemental ? 1 : 0;
        CHECK(supplemental == 4);
    }
}

TEST_CASE("rendering is pure and satisfies the turn invariants") {
    const auto lib = PromptLibrary::builtin();
    const std::map<std::string, std::string> bindings = {{"category", "Bus"},
                                                         {"caption", "A bus."},
                                                         {"phrase", "'a bus'"}};
    const auto a = lib.render_chat("Reflection", bindings);
    const auto b = lib.render_chat("Reflection", bindings);
    CHECK(a == b);
    CHECK(validate_turns(a).empty());
}

TEST_CASE("pick_generation_prompts: determinism, exhaustion, bounds") {
    Rng a(99);
    Rng b(99);
    CHECK(pick_generation_prompts(a, 2) == pick_generation_prompts(b, 2));

    Rng c(5);
    auto all = pick_generation_prompts(c, 9);
    CHECK(std::set<std::string>(all.begin(), all.end()).size() == 9);

    Rng d(5);
    CHECK_THROWS_AS(pick_generation_prompts(d, 0), UsageError);
    CHECK_THROWS_AS(pick_generation_prompts(d, 10), UsageError);
}

TEST_CASE("pick_generation_prompts: uniform inclusion over 10k draws") {
    Rng rng(20240817);
    std::map<std::string, int> inclusion;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        for (const auto& id : pick_generation_prompts(rng, 2)) ++inclusion[id];
    for (const auto& id : kRawGenIds) {
        const double freq = static_cast<double>(inclusion[id]) / draws;
        CHECK(freq == doctest::Approx(2.0 / 9.0).epsilon(0.09));  // 2/9 within +-0.02
        CHECK(std::abs(freq - 2.0 / 9.0) <= 0.02);
    }
}

TEST_CASE("prompt files in the repo equal the built-in templates") {
    const auto builtin = PromptLibrary::builtin();
    const auto from_disk =
        PromptLibrary::from_dir(realign::test::source_dir() + "/prompts");
    for (const auto& id : kTemplateIds) CHECK(from_disk.get(id) == builtin.get(id));
}
