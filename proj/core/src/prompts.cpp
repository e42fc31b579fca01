// SPDX-License-Identifier: Apache-2.0
#include "realign/prompts.hpp"

#include "realign/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>

namespace realign {

using nlohmann::json;

namespace detail {
std::map<std::string, PromptTemplate> builtin_templates();
}

const std::vector<std::string> kRawGenIds = {
    "RawGen1", "RawGen2", "RawGen3", "RawGen4", "RawGen5",
    "RawGen6", "RawGen7", "RawGen8", "RawGen9",
};

const std::vector<std::string> kTemplateIds = {
    "RawGen1", "RawGen2", "RawGen3", "RawGen4", "RawGen5", "RawGen6", "RawGen7",
    "RawGen8", "RawGen9", "Synonym", "Rewrite", "Reflection", "FinetuneQuestionGen",
    "FinetuneTargetArea", "VlmToolLanguage",
};

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    lib.templates_ = detail::builtin_templates();
    return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::string& dir) {
    PromptLibrary lib;
    for (const auto& id : kTemplateIds) {
        const std::string path = (std::filesystem::path(dir) / (id + ".json")).string();
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw ParseError("bad template file " + path + ": " + e.what());
        }
        PromptTemplate t;
        t.template_id = j.at("template_id").get<std::string>();
        if (t.template_id != id) throw ParseError("template id mismatch in " + path);
        t.system_text = j.value("system_text", std::string{});
        if (j.contains("examples")) {
            for (const auto& e : j["examples"]) {
                t.examples.push_back(InContextExample{e.at("prompt").get<std::string>(),
                                                      e.at("response").get<std::string>(),
                                                      e.value("supplemental", false)});
            }
        }
        t.placeholders = j.at("placeholders").get<std::vector<std::string>>();
        t.user_format = j.at("user_format").get<std::string>();
        lib.templates_.emplace(id, std::move(t));
    }
    return lib;
}

PromptLibrary PromptLibrary::canonical_only() const {
    PromptLibrary lib(*this);
    for (auto& [id, t] : lib.templates_) {
        std::erase_if(t.examples, [](const InContextExample& e) { return e.supplemental; });
    }
    return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& template_id) const {
    auto it = templates_.find(template_id);
    if (it == templates_.end()) throw UnknownTemplate(template_id);
    return it->second;
}

bool PromptLibrary::has(const std::string& template_id) const {
    return templates_.count(template_id) != 0;
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [id, t] : templates_) out.push_back(id);
    return out;
}

namespace {

/// Substitutes every <name> placeholder; values are inserted verbatim.
std::string substitute(const std::string& format, const std::vector<std::string>& placeholders,
                       const std::map<std::string, std::string>& bindings) {
    for (const auto& name : placeholders) {
        if (!bindings.count(name)) throw MissingBinding(name);
    }
    std::string out = format;
    for (const auto& name : placeholders) {
        const std::string token = "<" + name + ">";
        const std::string& value = bindings.at(name);
        std::size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

} // namespace

std::vector<ChatTurn> PromptLibrary::render_chat(
    const std::string& template_id, const std::map<std::string, std::string>& bindings) const {
    const PromptTemplate& t = get(template_id);
    std::vector<ChatTurn> turns;
    if (!t.system_text.empty()) turns.push_back(system_turn(t.system_text));
    for (const auto& example : t.examples) {
        turns.push_back(user_turn(example.prompt));
        turns.push_back(assistant_turn(example.response));
    }
    turns.push_back(user_turn(substitute(t.user_format, t.placeholders, bindings)));
    return turns;
}

void PromptLibrary::save_dir(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [id, t] : templates_) {
        json examples = json::array();
        for (const auto& e : t.examples) {
            json je{{"prompt", e.prompt}, {"response", e.response}};
            if (e.supplemental) je["supplemental"] = true;
            examples.push_back(std::move(je));
        }
        json j{{"template_id", t.template_id},
               {"system_text", t.system_text},
               {"examples", examples},
               {"placeholders", t.placeholders},
               {"user_format", t.user_format}};
        const std::string path = (std::filesystem::path(dir) / (id + ".json")).string();
        write_file_atomic(path, j.dump(2) + "\n");
    }
}

std::vector<std::string> pick_generation_prompts(Rng& rng, int k) {
    if (k < 1 || k > static_cast<int>(kRawGenIds.size()))
        throw UsageError("pick_generation_prompts: k must be in [1, 9]");
    const auto indices = rng.sample_distinct(static_cast<std::size_t>(k), kRawGenIds.size());
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (auto i : indices) ids.push_back(kRawGenIds[i]);
    return ids;
}

std::string render_vlm_tool_prompt(const std::string& category,
                                   const std::string& current_expression,
                                   const std::vector<std::string>& questions) {
    if (questions.empty()) throw UsageError("render_vlm_tool_prompt: questions empty");
    std::string joined;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        if (i) joined += ' ';
        joined += questions[i];
    }
    static const PromptLibrary lib = PromptLibrary::builtin();
    const PromptTemplate& t = lib.get("VlmToolLanguage");
    return substitute(t.user_format, t.placeholders,
                      {{"category", category},
                       {"expression", current_expression},
                       {"questions", joined}});
}

std::string format_object_entry(int id, const std::string& category, const NormalizedBox& box) {
    std::string out = "{'id':" + std::to_string(id) + ", 'category name':'" + category +
                      "', 'box':[" + format_fraction(box.x) + ", " + format_fraction(box.y) +
                      ", " + format_fraction(box.w) + ", " + format_fraction(box.h) + "]}";
    return out;
}

std::string format_object_list(const std::vector<std::pair<std::string, NormalizedBox>>& objects,
                               int first_id) {
    std::string out = "[";
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (i) out += ", ";
        out += format_object_entry(first_id + static_cast<int>(i), objects[i].first,
                                   objects[i].second);
    }
    out += "]";
    return out;
}

} // namespace realign
