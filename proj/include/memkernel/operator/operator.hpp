// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemOperator: tag, graph and fingerprint indexes over the live cubes, with
// structured, semantic and hybrid retrieval plus a topic/concept/fact planner.

#include "memkernel/core/codec.hpp"
#include "memkernel/core/fingerprint.hpp"
#include "memkernel/core/types.hpp"
#include "memkernel/governance/governance.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace memkernel {

// Boolean tag expression. Text form: `budget AND NOT (draft OR old)`;
// operators are case-insensitive, AND binds tighter than OR.
struct TagExpr {
    enum class Kind { Any, Term, And, Or, Not };
    Kind kind = Kind::Any;
    std::string tag;
    std::vector<TagExpr> children;

    static TagExpr any() { return {}; }
    static TagExpr term(std::string t) { return {Kind::Term, std::move(t), {}}; }
    static TagExpr all_of(std::vector<TagExpr> c) { return {Kind::And, {}, std::move(c)}; }
    static TagExpr any_of(std::vector<TagExpr> c) { return {Kind::Or, {}, std::move(c)}; }
    static TagExpr negate(TagExpr c) { return {Kind::Not, {}, {std::move(c)}}; }

    static TagExpr parse(std::string_view text);  // throws Error(MalformedFilter)
    std::string str() const;
    bool eval(const std::set<std::string>& tags) const;
    // Tags that every satisfying set must contain.
    std::set<std::string> required() const;
    bool operator==(const TagExpr&) const = default;
};

struct StructuredFilter {
    TagExpr tags;
    std::optional<Timestamp> from;  // created_at, inclusive
    std::optional<Timestamp> to;    // exclusive
    std::set<std::string> namespaces;
    std::set<MemoryLayer> layers;
    std::set<std::string> semantic_types;
    std::set<StateKind> states;

    void check() const;  // throws Error(MalformedFilter)
    bool matches(const MemCube& cube) const;
    bool operator==(const StructuredFilter&) const = default;
};

// JSON form: {"tags": "<expr text>" | {"and":[..]} | {"or":[..]} | {"not":..} | "tag",
//             "from", "to", "namespaces", "layers", "semantic_types", "states"}
void to_json(Json& j, const TagExpr& e);
void from_json(const Json& j, TagExpr& e);
void to_json(Json& j, const StructuredFilter& f);
void from_json(const Json& j, StructuredFilter& f);

enum class MatchedVia { Structured, Semantic, Hybrid };
std::string_view to_string(MatchedVia m) noexcept;

struct RankedHit {
    CubeId cube_id;
    double score = 0;
    MatchedVia matched_via = MatchedVia::Semantic;
    Timestamp updated_at;
    bool operator==(const RankedHit&) const = default;
};

void to_json(Json& j, const RankedHit& h);

// Ranking order: score desc, updated_at desc, cube_id asc.
bool hit_before(const RankedHit& a, const RankedHit& b) noexcept;

enum class Goal { Topic, Concept, Fact };
std::string_view to_string(Goal g) noexcept;

struct PlanStep {
    Goal goal = Goal::Fact;
    StructuredFilter filter;
    std::string query_text;
    std::size_t k = 1;
    std::vector<std::string> seed_tags;
    std::vector<std::string> expansion;  // neighbor tags found over graph adjacency
    bool operator==(const PlanStep&) const = default;
};

struct RetrievalPlan {
    std::vector<PlanStep> steps;
    bool operator==(const RetrievalPlan&) const = default;
};

void to_json(Json& j, const RetrievalPlan& p);

// Content nouns of a task: lowercase tokens longer than 3 characters that are
// not stopwords or task verbs, singularized, first-occurrence order.
std::vector<std::string> task_nouns(std::string_view text);

struct IndexStats {
    std::size_t cubes = 0;
    std::size_t tags = 0;
    std::size_t edges = 0;
};

class MemIndex {
public:
    explicit MemIndex(const Embedder& embedder = default_embedder()) : embedder_(&embedder) {}

    void upsert(const MemCube& cube);
    void remove(const CubeId& id);
    void clear();
    bool contains(const CubeId& id) const;
    IndexStats stats() const;

    // Canonical dump of the three indexes, for rebuild comparisons.
    std::string dump() const;

    std::vector<CubeId> query_structured(const StructuredFilter& filter, const Identity& actor,
                                         const CallContext& ctx) const;
    std::vector<RankedHit> query_semantic(std::string_view query_text, std::size_t k, const Identity& actor,
                                          const CallContext& ctx) const;
    std::vector<RankedHit> query_hybrid(const StructuredFilter& filter, std::string_view query_text, std::size_t k,
                                        const Identity& actor, const CallContext& ctx) const;

    // Tags carried by cubes one graph hop away from cubes tagged with any seed.
    std::vector<std::string> neighbor_tags(const std::set<std::string>& seeds) const;
    RetrievalPlan resolve_path(std::string_view task_text) const;
    std::vector<std::vector<RankedHit>> execute(const RetrievalPlan& plan, const Identity& actor,
                                                const CallContext& ctx) const;

    const Embedder& embedder() const { return *embedder_; }

private:
    using Entry = std::shared_ptr<const MemCube>;
    std::vector<RankedHit> rank(const std::vector<Entry>& candidates, std::string_view query_text, std::size_t k,
                                MatchedVia via) const;
    std::vector<Entry> candidates(const StructuredFilter* filter, const Identity& actor, const CallContext& ctx) const;
    void unlink(const CubeId& id);

    const Embedder* embedder_;
    mutable std::shared_mutex mu_;
    std::map<CubeId, Entry> cubes_;
    std::map<std::string, std::set<CubeId>> by_tag_;
    std::map<CubeId, std::vector<GraphRef>> out_edges_;
    std::map<CubeId, std::set<CubeId>> in_edges_;
};

struct HotCacheConfig {
    std::size_t c_hot = 5;        // touches inside the window to promote
    double window_seconds = 60;   // W
    double c_cold = 1.0 / 60.0;   // minimum touches per second to stay hot
    double drift_delta = 0.1;     // minimum cosine to the recent-query centroid
    std::size_t centroid_queries = 10;
    bool operator==(const HotCacheConfig&) const = default;
};

struct CacheChanges {
    std::vector<CubeId> promoted;
    std::vector<CubeId> invalidated;
    bool operator==(const CacheChanges&) const = default;
};

// Frequency-and-drift hot index. Evaluation is a pure function of the touch
// log, the query log and `now`.
class HotCache {
public:
    explicit HotCache(HotCacheConfig config = {}) : config_(config) {}

    void touch(const CubeId& id, const Fingerprint& fingerprint, Timestamp now);
    void note_query(const Fingerprint& query, Timestamp now);
    CacheChanges evaluate(Timestamp now);
    bool is_hot(const CubeId& id) const;
    std::set<CubeId> hot() const;
    const HotCacheConfig& config() const { return config_; }

private:
    HotCacheConfig config_;
    mutable std::mutex mu_;
    std::map<CubeId, std::vector<Timestamp>> touches_;
    std::map<CubeId, Fingerprint> fingerprints_;
    std::deque<Fingerprint> queries_;
    std::set<CubeId> hot_;
};

}  // namespace memkernel
