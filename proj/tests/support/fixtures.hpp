#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "support/temp_dir.hpp"
#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/orchestrator/bench.hpp"

namespace tipwise::testing {

inline std::vector<KnowledgeTip> seed_tips(const std::set<std::string>& exclude = {}) {
    std::vector<KnowledgeTip> out;
    for (auto& t : load_tip_corpus(source_dir() / "data/akb_seed.json")) {
        if (!exclude.count(t.id)) out.push_back(std::move(t));
    }
    return out;
}

inline std::shared_ptr<AkbStore> seed_store(const std::set<std::string>& exclude = {},
                                            const std::filesystem::path& path = {}) {
    auto store = std::make_shared<AkbStore>(path);
    store->import_tips(seed_tips(exclude));
    return store;
}

inline Suite shipped_suite() { return load_suite(source_dir() / "data/suite"); }

inline Suite only(const Suite& s, const std::set<std::string>& ids) {
    Suite out = s;
    out.tasks.clear();
    for (const auto& t : s.tasks) {
        if (ids.count(t.goal.id)) out.tasks.push_back(t);
    }
    return out;
}

/// The expert's corrective tip for the variant task, written the way an
/// expert would author it after reviewing the looping trajectory.
inline KnowledgeTip edit_configurations_tip(const std::string& id = "admin-hitl-01") {
    KnowledgeTip t;
    t.id = id;
    t.domain_label = "shopping_admin";
    t.scope = "Adding a size or color variation to a configurable product.";
    t.action_guidance =
        "Open the product with the Edit link in its grid row, then use \"Edit Configurations\" to add the new "
        "attribute values and save.";
    t.constraint = "Clicking the product name cell does nothing.";
    t.goal_alignment = "The new variation is listed under Current Variations.";
    t.url_patterns = {"*/admin/catalog/product*"};
    t.keywords = {"variation", "color", "size"};
    return t;
}

inline constexpr const char* kVariantTask = "t01_admin_phoebe_variant";

}  // namespace tipwise::testing
