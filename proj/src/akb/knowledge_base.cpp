#include "tipwise/akb/knowledge_base.hpp"

#include <algorithm>
#include <cmath>

#include "tipwise/core/error.hpp"
#include "tipwise/core/fs.hpp"
#include "tipwise/core/glob.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

std::string_view to_string(MatchStage s) {
    switch (s) {
        case MatchStage::url: return "url";
        case MatchStage::keyword: return "keyword";
        case MatchStage::embedding: return "embedding";
    }
    return "url";
}

KnowledgeBase::KnowledgeBase(std::shared_ptr<const Embedder> embedder)
    : embedder_(embedder ? std::move(embedder) : std::make_shared<TrigramEmbedder>()) {}

const KnowledgeTip* KnowledgeBase::find(std::string_view id) const {
    auto it = tips_.find(id);
    return it == tips_.end() ? nullptr : &it->second;
}

void KnowledgeBase::ensure_mutable() const {
    if (frozen_) {
        throw Error(ErrorCode::Frozen, "knowledge base is frozen");
    }
}

void KnowledgeBase::index_tip(const KnowledgeTip& tip) {
    for (const auto& k : tip.keywords) index_[k].insert(tip.id);
    tip_vectors_[tip.id] = embedder_->embed(tip_text(tip));
}

void KnowledgeBase::unindex_tip(const KnowledgeTip& tip) {
    for (const auto& k : tip.keywords) {
        auto it = index_.find(k);
        if (it == index_.end()) continue;
        it->second.erase(tip.id);
        if (it->second.empty()) index_.erase(it);
    }
    tip_vectors_.erase(tip.id);
}

void KnowledgeBase::add_tip(KnowledgeTip tip) {
    ensure_mutable();
    validate_tip(tip);
    if (tips_.count(tip.id)) {
        throw Error(ErrorCode::DuplicateId, "tip id already exists", tip.id);
    }
    index_tip(tip);
    auto id = tip.id;
    tips_.emplace(std::move(id), std::move(tip));
}

void KnowledgeBase::update_tip(KnowledgeTip tip) {
    ensure_mutable();
    validate_tip(tip);
    auto it = tips_.find(tip.id);
    if (it == tips_.end()) {
        throw Error(ErrorCode::NotFound, "no tip with this id", tip.id);
    }
    unindex_tip(it->second);
    index_tip(tip);
    it->second = std::move(tip);
}

void KnowledgeBase::remove_tip(std::string_view id) {
    ensure_mutable();
    auto it = tips_.find(id);
    if (it == tips_.end()) {
        throw Error(ErrorCode::NotFound, "no tip with this id", std::string(id));
    }
    unindex_tip(it->second);
    tips_.erase(it);
}

std::map<std::string, std::size_t> KnowledgeBase::domain_counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& [id, tip] : tips_) ++out[tip.domain_label];
    return out;
}

InvertedIndex KnowledgeBase::build_index(const TipMap& tips) {
    InvertedIndex idx;
    for (const auto& [id, tip] : tips) {
        for (const auto& k : tip.keywords) idx[k].insert(id);
    }
    return idx;
}

RetrievedKnowledge KnowledgeBase::retrieve(const Observation& obs, const Goal& goal,
                                           const RetrieveOptions& opts) const {
    if (opts.limit < 1) {
        throw Error(ErrorCode::InvalidArgument, "retrieve limit must be >= 1");
    }
    RetrievedKnowledge out;
    out.query.url = obs.url;

    const auto query_vec = embedder_->embed(obs.url + " " + goal.instruction);
    out.query.embedding_digest = embedding_digest(query_vec);

    std::set<std::string> terms;
    for (auto& t : text::tokenize(goal.instruction + "\n" + text::utf8_truncate(obs.ax_tree, opts.ax_tree_top_chars))) {
        terms.insert(std::move(t));
    }
    for (const auto& t : terms) {
        if (index_.count(t)) out.query.keywords.push_back(t);
    }

    std::vector<RetrievedItem> stage_url;
    std::vector<RetrievedItem> stage_kw;
    std::vector<RetrievedItem> stage_emb;
    std::set<std::string_view> taken;

    // stage 1: url patterns, scored by the most specific matching pattern
    for (const auto& [id, tip] : tips_) {
        double best = -1.0;
        for (const auto& p : tip.url_patterns) {
            if (match_url(p, obs.url)) best = std::max(best, static_cast<double>(glob_literal_count(p)));
        }
        if (best >= 0.0) {
            stage_url.push_back({tip, MatchStage::url, best});
            taken.insert(id);
        }
    }

    // stage 2: keyword overlap weighted by inverse tip frequency
    std::set<std::string_view> candidates;
    for (const auto& t : out.query.keywords) {
        for (const auto& id : index_.find(t)->second) {
            if (!taken.count(id)) candidates.insert(id);
        }
    }
    const double n_tips = static_cast<double>(tips_.size());
    for (auto id : candidates) {
        const auto& tip = tips_.find(id)->second;
        std::set<std::string_view> kws(tip.keywords.begin(), tip.keywords.end());
        double score = 0.0;
        for (auto kw : kws) {
            if (!terms.count(std::string(kw))) continue;
            double df = static_cast<double>(index_.find(kw)->second.size());
            score += std::log(1.0 + n_tips / df);
        }
        stage_kw.push_back({tip, MatchStage::keyword, score});
        taken.insert(tip.id);
    }

    // stage 3: embedding similarity over everything left
    for (const auto& [id, tip] : tips_) {
        if (taken.count(id)) continue;
        double score = cosine(query_vec, tip_vectors_.find(id)->second);
        if (score > opts.embedding_floor) stage_emb.push_back({tip, MatchStage::embedding, score});
    }

    auto by_rank = [](const RetrievedItem& a, const RetrievedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.tip.id < b.tip.id;
    };
    for (auto* stage : {&stage_url, &stage_kw, &stage_emb}) {
        std::sort(stage->begin(), stage->end(), by_rank);
        for (auto& item : *stage) {
            if (out.items.size() >= opts.limit) return out;
            out.items.push_back(std::move(item));
        }
    }
    return out;
}

json KnowledgeBase::to_json() const {
    json tips = json::array();
    for (const auto& [id, tip] : tips_) tips.push_back(tip);
    return json{{"v", 1}, {"frozen", frozen_}, {"tips", std::move(tips)}};
}

KnowledgeBase KnowledgeBase::from_json(const json& doc, std::shared_ptr<const Embedder> embedder) {
    if (doc.value("v", 0) != 1) {
        throw Error(ErrorCode::InvalidArgument, "unsupported AKB document version");
    }
    KnowledgeBase kb(std::move(embedder));
    for (const auto& t : doc.at("tips")) kb.add_tip(t.get<KnowledgeTip>());
    if (doc.value("frozen", false)) kb.freeze();
    return kb;
}

// ---- store ---------------------------------------------------------------

AkbStore::AkbStore(std::filesystem::path path, std::shared_ptr<const Embedder> embedder)
    : path_(std::move(path)) {
    if (!path_.empty() && std::filesystem::exists(path_)) {
        json doc;
        try {
            doc = json::parse(fs::read_file(path_));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::StoreUnavailable, "AKB file is not valid JSON", e.what());
        }
        current_ = std::make_shared<const KnowledgeBase>(KnowledgeBase::from_json(doc, std::move(embedder)));
    } else {
        current_ = std::make_shared<const KnowledgeBase>(std::move(embedder));
    }
}

std::shared_ptr<const KnowledgeBase> AkbStore::snapshot() const {
    std::lock_guard lock(read_mu_);
    return current_;
}

void AkbStore::mutate(const std::function<void(KnowledgeBase&)>& fn) {
    std::lock_guard wlock(write_mu_);
    auto next = std::make_shared<KnowledgeBase>(*snapshot());
    fn(*next);
    if (!path_.empty()) {
        try {
            fs::write_file_atomic(path_, next->to_json().dump(2) + "\n");
        } catch (const Error& e) {
            throw Error(ErrorCode::StoreUnavailable, "cannot persist AKB", e.what());
        }
    }
    std::lock_guard rlock(read_mu_);
    current_ = std::move(next);
}

void AkbStore::add_tip(KnowledgeTip tip) {
    mutate([&](KnowledgeBase& kb) { kb.add_tip(std::move(tip)); });
}

void AkbStore::update_tip(KnowledgeTip tip) {
    mutate([&](KnowledgeBase& kb) { kb.update_tip(std::move(tip)); });
}

void AkbStore::remove_tip(std::string_view id) {
    mutate([&](KnowledgeBase& kb) { kb.remove_tip(id); });
}

void AkbStore::freeze() {
    if (snapshot()->frozen()) return;
    mutate([](KnowledgeBase& kb) { kb.freeze(); });
}

std::size_t AkbStore::import_tips(const std::vector<KnowledgeTip>& tips) {
    mutate([&](KnowledgeBase& kb) {
        for (const auto& t : tips) kb.add_tip(t);
    });
    return tips.size();
}

std::vector<KnowledgeTip> load_tip_corpus(const std::filesystem::path& path) {
    json doc = json::parse(fs::read_file(path));
    const json& arr = doc.is_array() ? doc : doc.at("tips");
    return arr.get<std::vector<KnowledgeTip>>();
}

void to_json(json& j, const RetrievedKnowledge& k) {
    json items = json::array();
    for (const auto& it : k.items) {
        items.push_back(json{{"tip_id", it.tip.id},
                             {"domain_label", it.tip.domain_label},
                             {"stage", to_string(it.stage)},
                             {"score", it.score}});
    }
    j = json{{"kind", "retrieved_knowledge"},
             {"items", std::move(items)},
             {"query", json{{"url", k.query.url},
                            {"keywords", k.query.keywords},
                            {"embedding_digest", k.query.embedding_digest}}}};
}

}  // namespace tipwise
