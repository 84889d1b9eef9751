#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcg/core_model.hpp"
#include "rcg/disturbed_db.hpp"
#include "rcg/embedding.hpp"

namespace rcg {

// Selection policy for replacement entries. The random baseline carries an
// explicit seed so runs are reproducible.
struct RetrievalStrategy {
    enum class Kind { MostIrrelevant, Random };
    Kind kind = Kind::MostIrrelevant;
    std::uint64_t seed = 0;

    static RetrievalStrategy most_irrelevant() { return {Kind::MostIrrelevant, 0}; }
    static RetrievalStrategy random(std::uint64_t seed) { return {Kind::Random, seed}; }
    std::string name() const;
};

struct RetrievalResult {
    std::string entry_id;
    double distance = 0.0;   // true L2 distance to the chosen entry
    std::size_t rank_basis = 0; // candidates scanned
};

// Immutable scan index over a database snapshot: entries ordered by
// entry_id, embeddings flattened into one row-major matrix. Row-index
// tie-breaking on the sorted order realizes the smallest-entry_id rule.
class RetrievalIndex {
  public:
    explicit RetrievalIndex(const DisturbedDatabase& db); // throws EmptyDatabase

    RetrievalResult most_irrelevant(const EmbeddingVector& query) const;
    // Serial reference path; identical selection, kept for verification and
    // single-threaded timing.
    RetrievalResult most_irrelevant_serial(const EmbeddingVector& query) const;
    // Same scan with rows masked out; used by distinct-slot selection.
    RetrievalResult most_irrelevant_excluding(const EmbeddingVector& query,
                                              const std::vector<unsigned char>& skip) const;

    std::size_t size() const { return order_.size(); }
    std::size_t dim() const { return dim_; }
    const DisturbedEntry& entry(std::size_t sorted_pos) const;

  private:
    void check_query(const EmbeddingVector& query) const;

    const DisturbedDatabase* db_;
    std::vector<std::size_t> order_; // positions into db_->entries, sorted by entry_id
    std::vector<double> matrix_;     // size() x dim(), rows follow order_
    std::size_t dim_ = 0;
};

// One-off exhaustive scan straight over the database, no index. Same
// selection rule as the index path.
RetrievalResult most_irrelevant(const EmbeddingVector& query, const DisturbedDatabase& db);

// Substitutes every comment slot per the strategy: embed the comment, pick a
// replacement, keep the slot's id and author, swap in the disturbed text.
// The system prompt passes through byte-identical and provenance is recorded
// for every slot. All-or-nothing: any failure leaves no partial result.
// Entries may serve several slots unless distinct_entries is set, which
// switches to greedy without-replacement selection.
DefendedQuery defend_query(const PvaQuery& query, const RetrievalIndex& index,
                           const EmbedderSpec& embedder, const RetrievalStrategy& strategy,
                           bool distinct_entries = false);
DefendedQuery defend_query(const PvaQuery& query, const DisturbedDatabase& db,
                           const EmbedderSpec& embedder, const RetrievalStrategy& strategy,
                           bool distinct_entries = false);

} // namespace rcg
