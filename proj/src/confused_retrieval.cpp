#include "rcg/confused_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcg/retrieval_kernel.hpp"
#include "rcg/rng.hpp"

namespace rcg {

std::string RetrievalStrategy::name() const {
    if (kind == Kind::MostIrrelevant) return "most_irrelevant";
    return "random(seed=" + std::to_string(seed) + ")";
}

RetrievalIndex::RetrievalIndex(const DisturbedDatabase& db) : db_(&db) {
    if (db.entries.empty()) throw EmptyDatabase("disturbed database has no entries");
    dim_ = db.entries.front().embedding.dim();

    order_.resize(db.entries.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return db.entries[a].entry_id < db.entries[b].entry_id;
    });

    matrix_.reserve(order_.size() * dim_);
    for (std::size_t pos : order_) {
        const auto& embedding = db.entries[pos].embedding;
        if (embedding.dim() != dim_)
            throw DimensionMismatch("entry " + db.entries[pos].entry_id + " has dim " +
                                    std::to_string(embedding.dim()) + ", database dim is " +
                                    std::to_string(dim_));
        matrix_.insert(matrix_.end(), embedding.values.begin(), embedding.values.end());
    }
}

const DisturbedEntry& RetrievalIndex::entry(std::size_t sorted_pos) const {
    return db_->entries[order_[sorted_pos]];
}

void RetrievalIndex::check_query(const EmbeddingVector& query) const {
    if (query.dim() != dim_)
        throw DimensionMismatch("query dim " + std::to_string(query.dim()) +
                                ", database dim " + std::to_string(dim_));
}

RetrievalResult RetrievalIndex::most_irrelevant(const EmbeddingVector& query) const {
    check_query(query);
    auto hit = kernel::farthest_row(matrix_, size(), dim_, query.values);
    return {entry(hit.row).entry_id, std::sqrt(hit.distance_squared), size()};
}

RetrievalResult RetrievalIndex::most_irrelevant_serial(const EmbeddingVector& query) const {
    check_query(query);
    auto hit = kernel::farthest_row_serial(matrix_, size(), dim_, query.values);
    return {entry(hit.row).entry_id, std::sqrt(hit.distance_squared), size()};
}

RetrievalResult RetrievalIndex::most_irrelevant_excluding(
    const EmbeddingVector& query, const std::vector<unsigned char>& skip) const {
    check_query(query);
    auto hit = kernel::farthest_row(matrix_, size(), dim_, query.values, skip);
    if (!hit.found()) throw EmptyDatabase("every database entry is excluded from the scan");
    std::size_t scanned = size() - static_cast<std::size_t>(
                                       std::count(skip.begin(), skip.end(), 1));
    return {entry(hit.row).entry_id, std::sqrt(hit.distance_squared), scanned};
}

RetrievalResult most_irrelevant(const EmbeddingVector& query, const DisturbedDatabase& db) {
    if (db.entries.empty()) throw EmptyDatabase("disturbed database has no entries");

    std::size_t best = db.entries.size();
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < db.entries.size(); ++i) {
        const auto& e = db.entries[i];
        if (e.embedding.dim() != query.dim())
            throw DimensionMismatch("query dim " + std::to_string(query.dim()) +
                                    ", entry " + e.entry_id + " dim " +
                                    std::to_string(e.embedding.dim()));
        double d2 = l2_distance_squared(query.values, e.embedding.values);
        if (d2 > best_d2 ||
            (d2 == best_d2 && e.entry_id < db.entries[best].entry_id)) {
            best = i;
            best_d2 = d2;
        }
    }
    return {db.entries[best].entry_id, std::sqrt(best_d2), db.entries.size()};
}

namespace {

struct SlotChoice {
    std::size_t sorted_pos = 0;
    RetrievalResult result;
};

SlotChoice pick_random(const RetrievalIndex& index, const EmbeddingVector& query,
                       std::uint64_t& rng_state, std::vector<unsigned char>* used) {
    const std::size_t n = index.size();
    std::size_t pos = static_cast<std::size_t>(splitmix64(rng_state) % n);
    if (used) {
        std::size_t probed = 0;
        while ((*used)[pos]) {
            pos = (pos + 1) % n; // deterministic probe on collision
            if (++probed == n)
                throw EmptyDatabase("distinct selection exhausted the database");
        }
    }
    const auto& entry = index.entry(pos);
    double distance = l2_distance(query, entry.embedding);
    return {pos, {entry.entry_id, distance, 1}};
}

std::size_t sorted_pos_of(const RetrievalIndex& index, const std::string& entry_id) {
    // Entries are unique by id; linear lookup is fine at these corpus sizes.
    for (std::size_t i = 0; i < index.size(); ++i)
        if (index.entry(i).entry_id == entry_id) return i;
    return index.size();
}

} // namespace

DefendedQuery defend_query(const PvaQuery& query, const RetrievalIndex& index,
                           const EmbedderSpec& embedder, const RetrievalStrategy& strategy,
                           bool distinct_entries) {
    if (query.comments.empty()) throw EmptyComments("query has no comments to defend");
    if (embedder.dim != index.dim())
        throw DimensionMismatch("embedder dim " + std::to_string(embedder.dim) +
                                ", database dim " + std::to_string(index.dim()));
    if (distinct_entries && query.comments.size() > index.size())
        throw EmptyDatabase("distinct selection needs at least as many entries as comments");

    std::vector<std::string> texts;
    texts.reserve(query.comments.size());
    for (const auto& c : query.comments) texts.push_back(c.text);
    const std::vector<EmbeddingVector> embeddings = embed_batch(embedder, texts);

    std::vector<unsigned char> used(distinct_entries ? index.size() : 0, 0);
    std::uint64_t rng_state = strategy.seed;

    DefendedQuery defended;
    defended.system_prompt = query.system_prompt;
    defended.comments.reserve(query.comments.size());
    defended.provenance.reserve(query.comments.size());

    for (std::size_t slot = 0; slot < query.comments.size(); ++slot) {
        SlotChoice choice;
        if (strategy.kind == RetrievalStrategy::Kind::Random) {
            choice = pick_random(index, embeddings[slot], rng_state,
                                 distinct_entries ? &used : nullptr);
        } else if (distinct_entries) {
            choice.result = index.most_irrelevant_excluding(embeddings[slot], used);
            choice.sorted_pos = sorted_pos_of(index, choice.result.entry_id);
        } else {
            choice.result = index.most_irrelevant(embeddings[slot]);
            choice.sorted_pos = sorted_pos_of(index, choice.result.entry_id);
        }
        if (distinct_entries) used[choice.sorted_pos] = 1;

        const Comment& original = query.comments[slot];
        const DisturbedEntry& replacement = index.entry(choice.sorted_pos);
        defended.comments.push_back({original.id, original.user_id, replacement.disturbed_text});
        defended.provenance.push_back(
            {original.id, choice.result.entry_id, choice.result.distance});
    }
    return defended;
}

DefendedQuery defend_query(const PvaQuery& query, const DisturbedDatabase& db,
                           const EmbedderSpec& embedder, const RetrievalStrategy& strategy,
                           bool distinct_entries) {
    RetrievalIndex index(db);
    return defend_query(query, index, embedder, strategy, distinct_entries);
}

} // namespace rcg
