#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tipwise/akb/embedder.hpp"
#include "tipwise/akb/tip.hpp"
#include "tipwise/core/types.hpp"

namespace tipwise {

/// Retrieval cascade stages, in precedence order.
enum class MatchStage { url = 0, keyword = 1, embedding = 2 };

std::string_view to_string(MatchStage s);

struct RetrievedItem {
    KnowledgeTip tip;
    MatchStage stage = MatchStage::url;
    double score = 0.0;
};

struct QuerySnapshot {
    std::string url;
    std::vector<std::string> keywords;  // query terms present in the keyword index
    std::string embedding_digest;
};

/// Ranked by stage (url < keyword < embedding), then descending score,
/// then ascending tip id.
struct RetrievedKnowledge {
    std::vector<RetrievedItem> items;
    QuerySnapshot query;

    bool empty() const { return items.empty(); }
};

struct RetrieveOptions {
    std::size_t limit = 5;
    std::size_t ax_tree_top_chars = 2000;  // "top region" of the tree used for keywords
    double embedding_floor = 0.0;          // stage 3 keeps scores strictly above this
};

using InvertedIndex = std::map<std::string, std::set<std::string>, std::less<>>;
using TipMap = std::map<std::string, KnowledgeTip, std::less<>>;

/// The tip set with its derived keyword index and cached tip embeddings.
/// A value type; AkbStore adds persistence and snapshot isolation.
class KnowledgeBase {
public:
    explicit KnowledgeBase(std::shared_ptr<const Embedder> embedder = nullptr);

    /// Throws Frozen, InvalidTip/BadPattern, DuplicateId.
    void add_tip(KnowledgeTip tip);
    /// Throws Frozen, InvalidTip/BadPattern, NotFound.
    void update_tip(KnowledgeTip tip);
    /// Throws Frozen, NotFound.
    void remove_tip(std::string_view id);
    void freeze() { frozen_ = true; }

    bool frozen() const { return frozen_; }
    std::size_t size() const { return tips_.size(); }
    const TipMap& tips() const { return tips_; }
    const KnowledgeTip* find(std::string_view id) const;
    const InvertedIndex& keyword_index() const { return index_; }
    const Embedder& embedder() const { return *embedder_; }
    std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }
    std::map<std::string, std::size_t> domain_counts() const;

    RetrievedKnowledge retrieve(const Observation& obs, const Goal& goal,
                                const RetrieveOptions& opts = {}) const;

    static InvertedIndex build_index(const TipMap& tips);

    /// `{v:1, frozen, tips:[...]}` with tips sorted by id.
    json to_json() const;
    static KnowledgeBase from_json(const json& doc, std::shared_ptr<const Embedder> embedder = nullptr);

private:
    void index_tip(const KnowledgeTip& tip);
    void unindex_tip(const KnowledgeTip& tip);
    void ensure_mutable() const;

    TipMap tips_;
    InvertedIndex index_;
    std::map<std::string, std::vector<double>, std::less<>> tip_vectors_;
    std::shared_ptr<const Embedder> embedder_;
    bool frozen_ = false;
};

/// Persistent, thread-safe owner of a KnowledgeBase. Writers are serialized
/// and copy-on-write; readers hold immutable snapshots, so a retrieval never
/// sees a half-applied write. Every mutation is persisted (temp file +
/// rename) before it becomes visible.
class AkbStore {
public:
    /// Loads `path` if it exists; an empty path keeps the store in memory.
    explicit AkbStore(std::filesystem::path path = {}, std::shared_ptr<const Embedder> embedder = nullptr);

    std::shared_ptr<const KnowledgeBase> snapshot() const;

    void add_tip(KnowledgeTip tip);
    void update_tip(KnowledgeTip tip);
    void remove_tip(std::string_view id);
    void freeze();
    /// All-or-nothing bulk add; returns the number of tips added.
    std::size_t import_tips(const std::vector<KnowledgeTip>& tips);

    const std::filesystem::path& path() const { return path_; }

private:
    void mutate(const std::function<void(KnowledgeBase&)>& fn);

    std::filesystem::path path_;
    mutable std::mutex read_mu_;
    std::mutex write_mu_;
    std::shared_ptr<const KnowledgeBase> current_;
};

/// Reads a tip corpus: either an AKB document or a bare JSON array of tips.
std::vector<KnowledgeTip> load_tip_corpus(const std::filesystem::path& path);

void to_json(json& j, const RetrievedKnowledge& k);

}  // namespace tipwise
