// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "realign/gateway.hpp"
#include "realign/util.hpp"

#include <map>
#include <string>
#include <vector>

namespace realign {

// ---------------------------------------------------------------------------
// Prompt templates
//
// Template text is embedded in the library (prompt_texts.cpp) and also ships
// as UTF-8 files under the repo's prompts/ directory, one file per template
// id; the two are kept byte-identical by a test. Placeholders are
// angle-bracket tokens (<object>, <boxes>, ...). In-context examples flagged
// `supplemental` are repo-authored additions in the same format as the
// original example and are not sourced from the upstream prompt sets.
// ---------------------------------------------------------------------------

struct InContextExample {
    std::string prompt;
    std::string response;
    bool supplemental = false;

    bool operator==(const InContextExample&) const = default;
};

struct PromptTemplate {
    std::string template_id;
    std::string system_text;                    // empty for the RawGen templates
    std::vector<InContextExample> examples;
    std::vector<std::string> placeholders;      // required bindings, in order
    std::string user_format;                    // final user block with <placeholders>

    bool operator==(const PromptTemplate&) const = default;
};

/// Closed set of template ids.
extern const std::vector<std::string> kTemplateIds;
extern const std::vector<std::string> kRawGenIds;  // RawGen1..RawGen9

class PromptLibrary {
public:
    /// Library with the embedded built-in templates.
    static PromptLibrary builtin();
    /// Library loaded from a prompts/ directory (one <id>.json per template).
    static PromptLibrary from_dir(const std::string& dir);

    /// Copy whose in-context example lists keep only the non-supplemental
    /// entries (used by the golden-file tests).
    PromptLibrary canonical_only() const;

    const PromptTemplate& get(const std::string& template_id) const;
    bool has(const std::string& template_id) const;
    std::vector<std::string> ids() const;

    /// Renders [system?, (user, assistant) x examples, final user], exactly
    /// the shape the serving code expects. Bindings must cover every
    /// placeholder of the template; values substitute verbatim (newlines
    /// preserved, no escaping).
    std::vector<ChatTurn> render_chat(const std::string& template_id,
                                      const std::map<std::string, std::string>& bindings) const;

    /// Writes one <id>.json per template.
    void save_dir(const std::string& dir) const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

/// k distinct RawGen template ids drawn uniformly without replacement.
/// 1 <= k <= 9; reproducible from the rng state.
std::vector<std::string> pick_generation_prompts(Rng& rng, int k);

/// Byte-exact instantiation of the VLM tool language prompt. `questions` must
/// be non-empty; entries are joined with single spaces.
std::string render_vlm_tool_prompt(const std::string& category,
                                   const std::string& current_expression,
                                   const std::vector<std::string>& questions);

// Helpers for the rewrite template's object-list syntax:
//   {'id':0, 'category name':'Home appliance', 'box':[0.68, 0.52, 0.15, 0.05]}
std::string format_object_entry(int id, const std::string& category, const NormalizedBox& box);
std::string format_object_list(
    const std::vector<std::pair<std::string, NormalizedBox>>& objects, int first_id = 0);

} // namespace realign
