#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tipwise {

/// Text-embedding port used by the third retrieval stage.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic offline embedder: lowercased text, byte trigrams hashed
/// (FNV-1a) into `dim` buckets, raw counts.
class TrigramEmbedder final : public Embedder {
public:
    explicit TrigramEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::vector<double> embed(std::string_view text) const override;
    std::string name() const override { return "trigram-" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

/// Cosine similarity; 0 when either vector is all zeros or sizes differ.
double cosine(std::span<const double> a, std::span<const double> b);

/// Short stable digest of a vector, for query snapshots.
std::string embedding_digest(std::span<const double> v);

}  // namespace tipwise
