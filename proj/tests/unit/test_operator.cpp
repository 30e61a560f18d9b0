// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "memkernel/core/errors.hpp"
#include "memkernel/operator/operator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace memkernel {
namespace {

using testing::make_cube;
using testing::t0;

CallContext ctx() { return CallContext{"s", "", "", t0()}; }

MemCube tagged(IdGenerator& ids, const std::string& text, std::set<std::string> tags, Timestamp at = t0(),
               const Identity& owner = "alice")
{
    MemCube c = make_cube(ids, text, at, "clinic", owner);
    c.header.tags = std::move(tags);
    return c;
}

// Brute-force cosine ranking written without the index.
std::vector<std::pair<CubeId, double>> brute_rank(const std::vector<MemCube>& corpus, const std::string& query,
                                                  std::size_t k)
{
    const auto q = testing::oracle_fingerprint(query);
    struct Row {
        CubeId id;
        double score;
        Timestamp updated;
    };
    std::vector<Row> rows;
    for (const auto& c : corpus) {
        double s = 0;
        for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * c.header.fingerprint[i];
        rows.push_back({c.cube_id, s, c.header.updated_at});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.updated.micros != b.updated.micros) return a.updated.micros > b.updated.micros;
        return a.id < b.id;
    });
    std::vector<std::pair<CubeId, double>> out;
    for (std::size_t i = 0; i < rows.size() && i < k; ++i) out.emplace_back(rows[i].id, rows[i].score);
    return out;
}

void expect_same_ranking(const std::vector<RankedHit>& got, const std::vector<std::pair<CubeId, double>>& want)
{
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].cube_id, want[i].first) << "rank " << i;
        EXPECT_NEAR(got[i].score, want[i].second, 1e-12);
    }
}

std::vector<MemCube> synthetic_corpus(std::size_t n, unsigned seed)
{
    IdGenerator ids(seed);
    std::mt19937_64 rng(seed);
    const auto& vocab = testing::vocabulary();
    std::vector<MemCube> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::set<std::string> tags;
        for (int t = 0; t < 3; ++t) tags.insert(vocab[rng() % 8]);
        // Repeated timestamps force the updated_at tie-break to matter.
        out.push_back(tagged(ids, testing::random_text(rng, 2, 6), tags, t0().plus_seconds(static_cast<std::int64_t>(rng() % 20))));
    }
    return out;
}

TEST(TagExpr, ParseAndEval)
{
    const auto e = TagExpr::parse("budget AND NOT draft");
    EXPECT_TRUE(e.eval({"budget"}));
    EXPECT_FALSE(e.eval({"budget", "draft"}));
    EXPECT_FALSE(e.eval({"draft"}));
    const auto p = TagExpr::parse("a OR b AND c");  // AND binds tighter
    EXPECT_TRUE(p.eval({"a"}));
    EXPECT_FALSE(p.eval({"b"}));
    EXPECT_TRUE(p.eval({"b", "c"}));
    EXPECT_EQ(TagExpr::parse(TagExpr::parse("(x OR y) AND NOT z").str()), TagExpr::parse("(x OR y) AND NOT z"));
    for (const char* bad : {"AND", "a AND", "(a", "a)", "NOT", "a OR OR b"}) {
        try {
            TagExpr::parse(bad);
            FAIL() << bad;
        } catch (const Error& err) {
            EXPECT_EQ(err.code(), ErrorCode::MalformedFilter) << bad;
        }
    }
}

TEST(Structured, BudgetAndNotDraft)
{
    IdGenerator ids(1);
    MemIndex index;
    const std::vector<MemCube> cubes{
        tagged(ids, "q1 budget", {"budget"}),
        tagged(ids, "budget draft", {"budget", "draft"}),
        tagged(ids, "travel", {"travel"}),
        tagged(ids, "budget final", {"budget", "final"}),
        tagged(ids, "draft notes", {"draft"}),
    };
    for (const auto& c : cubes) index.upsert(c);
    StructuredFilter f;
    f.tags = TagExpr::parse("budget AND NOT draft");
    std::vector<CubeId> oracle;
    for (const auto& c : cubes) {
        if (c.header.tags.count("budget") && !c.header.tags.count("draft")) oracle.push_back(c.cube_id);
    }
    std::sort(oracle.begin(), oracle.end());
    ASSERT_EQ(oracle.size(), 2U);
    EXPECT_EQ(index.query_structured(f, "alice", ctx()), oracle);
    EXPECT_EQ(index.query_structured({}, "alice", ctx()).size(), 5U);
    EXPECT_TRUE(index.query_structured(f, "mallory", ctx()).empty());
}

TEST(Structured, TimeSpanMustBeOrdered)
{
    MemIndex index;
    StructuredFilter f;
    f.from = t0();
    f.to = t0();
    try {
        index.query_structured(f, "alice", ctx());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedFilter);
    }
    EXPECT_THROW(Json::parse(R"({"tags":{"xor":[]}})").get<StructuredFilter>(), Error);
}

TEST(Semantic, MatchesBruteForceTop20)
{
    const auto corpus = synthetic_corpus(200, 21);
    MemIndex index;
    for (const auto& c : corpus) index.upsert(c);
    std::mt19937_64 rng(3);
    for (int q = 0; q < 25; ++q) {
        const std::string query = testing::random_text(rng, 1, 4);
        expect_same_ranking(index.query_semantic(query, 20, "alice", ctx()), brute_rank(corpus, query, 20));
    }
}

TEST(Semantic, SelfSimilarityAndOversizedK)
{
    IdGenerator ids(2);
    MemIndex index;
    std::vector<MemCube> corpus;
    for (const char* t : {"metformin dosage review", "quarterly sales report", "travel policy"}) {
        corpus.push_back(tagged(ids, t, {}));
        index.upsert(corpus.back());
    }
    const auto hits = index.query_semantic("quarterly sales report", 1, "alice", ctx());
    ASSERT_EQ(hits.size(), 1U);
    EXPECT_EQ(hits[0].cube_id, corpus[1].cube_id);
    EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
    const auto all = index.query_semantic("sales", 50, "alice", ctx());
    EXPECT_EQ(all.size(), 3U);
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), hit_before));
}

TEST(Hybrid, EqualsSemanticOverFilteredSet)
{
    const auto corpus = synthetic_corpus(200, 22);
    MemIndex index;
    for (const auto& c : corpus) index.upsert(c);
    StructuredFilter f;
    f.tags = TagExpr::parse("budget AND meeting");
    std::vector<MemCube> narrowed;
    for (const auto& c : corpus) {
        if (c.header.tags.count("budget") && c.header.tags.count("meeting")) narrowed.push_back(c);
    }
    ASSERT_GT(narrowed.size(), 5U);
    ASSERT_LT(narrowed.size(), 100U);
    expect_same_ranking(index.query_hybrid(f, "contract risk notes", 10, "alice", ctx()),
                        brute_rank(narrowed, "contract risk notes", 10));

    StructuredFilter none;
    none.tags = TagExpr::term("no-such-tag");
    EXPECT_TRUE(index.query_hybrid(none, "x", 10, "alice", ctx()).empty());

    const auto neutral = index.query_hybrid({}, "risk clause", 20, "alice", ctx());
    const auto semantic = index.query_semantic("risk clause", 20, "alice", ctx());
    ASSERT_EQ(neutral.size(), semantic.size());
    for (std::size_t i = 0; i < neutral.size(); ++i) {
        EXPECT_EQ(neutral[i].cube_id, semantic[i].cube_id);
        EXPECT_EQ(neutral[i].score, semantic[i].score);
    }
}

TEST(Index, InterleavedMutationsEqualRebuild)
{
    auto corpus = synthetic_corpus(1000, 23);
    std::mt19937_64 rng(9);
    IdGenerator ids(99);
    MemIndex live;
    std::map<CubeId, MemCube> truth;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        live.upsert(corpus[i]);
        truth[corpus[i].cube_id] = corpus[i];
        if (rng() % 5 == 0) {
            auto it = truth.begin();
            std::advance(it, static_cast<long>(rng() % truth.size()));
            live.remove(it->first);
            truth.erase(it);
        }
        if (rng() % 7 == 0 && !truth.empty()) {
            auto it = truth.begin();
            std::advance(it, static_cast<long>(rng() % truth.size()));
            MemCube c = it->second;
            c.header.tags = {"retagged"};
            auto p = *c.plaintext();
            p.graph_refs = {GraphRef{"cites", corpus[rng() % corpus.size()].cube_id}};
            c.payload = p;
            live.upsert(c);
            it->second = c;
        }
    }
    MemIndex rebuilt;
    for (const auto& [_, c] : truth) rebuilt.upsert(c);
    EXPECT_EQ(live.dump(), rebuilt.dump());
    StructuredFilter f;
    f.tags = TagExpr::parse("retagged OR budget");
    EXPECT_EQ(live.query_structured(f, "alice", ctx()), rebuilt.query_structured(f, "alice", ctx()));
    EXPECT_EQ(live.query_semantic("budget notes", 20, "alice", ctx()),
              rebuilt.query_semantic("budget notes", 20, "alice", ctx()));
}

TEST(Index, RemoveHidesFromEveryQuery)
{
    IdGenerator ids(4);
    MemIndex index;
    const MemCube c = tagged(ids, "budget memo", {"budget"});
    index.upsert(c);
    StructuredFilter f;
    f.tags = TagExpr::term("budget");
    EXPECT_EQ(index.query_structured(f, "alice", ctx()), std::vector<CubeId>{c.cube_id});
    index.remove(c.cube_id);
    EXPECT_TRUE(index.query_structured(f, "alice", ctx()).empty());
    EXPECT_TRUE(index.query_semantic("budget memo", 5, "alice", ctx()).empty());
    EXPECT_EQ(index.stats().tags, 0U);
}

TEST(Index, AclSoundnessFuzz)
{
    std::mt19937_64 rng(31);
    IdGenerator ids(5);
    const std::vector<Identity> people{"alice", "bob", "carol", "dave", "erin"};
    const MemoryLayer layers[] = {MemoryLayer::Private, MemoryLayer::Shared, MemoryLayer::Global};
    const ShareScope scopes[] = {ShareScope::Private, ShareScope::Shared, ShareScope::ReadOnly};
    MemIndex index;
    std::vector<MemCube> corpus;
    for (int i = 0; i < 300; ++i) {
        MemCube c = tagged(ids, testing::random_text(rng), {testing::vocabulary()[rng() % 5]}, t0(),
                           people[rng() % people.size()]);
        c.header.layer = layers[rng() % 3];
        c.header.acl.share_scope = scopes[rng() % 3];
        if (c.header.acl.share_scope == ShareScope::ReadOnly) c.header.acl.writers = {c.header.acl.owner};
        for (const auto& p : people) {
            if (rng() % 4 == 0) c.header.acl.readers.insert(p);
        }
        corpus.push_back(c);
        index.upsert(c);
    }
    for (const auto& actor : people) {
        std::set<CubeId> seen;
        for (int q = 0; q < 20; ++q) {
            for (const auto& h : index.query_semantic(testing::random_text(rng, 1, 3), 50, actor, ctx())) seen.insert(h.cube_id);
            StructuredFilter f;
            f.tags = TagExpr::term(testing::vocabulary()[rng() % 5]);
            for (const auto& id : index.query_structured(f, actor, ctx())) seen.insert(id);
            for (const auto& h : index.query_hybrid(f, "risk", 50, actor, ctx())) seen.insert(h.cube_id);
        }
        for (const auto& c : corpus) {
            if (!decide_access(actor, c, ctx(), AccessOp::Read).allowed) {
                EXPECT_FALSE(seen.contains(c.cube_id)) << actor << " saw " << c.cube_id;
            }
        }
    }
}

TEST(Plan, ContractRiskClauses)
{
    IdGenerator ids(6);
    MemIndex index;
    MemCube clause = tagged(ids, "indemnity cap clause", {"risk-clause"});
    MemCube caselog = tagged(ids, "case log 17", {"case-log", "litigation"});
    auto p = *clause.plaintext();
    p.graph_refs = {GraphRef{"cites", caselog.cube_id}};
    clause.payload = p;
    index.upsert(clause);
    index.upsert(caselog);

    const auto plan = index.resolve_path("review contract risk clauses");
    ASSERT_EQ(plan.steps.size(), 3U);
    EXPECT_EQ(plan.steps[0].goal, Goal::Topic);
    EXPECT_EQ(plan.steps[0].seed_tags, std::vector<std::string>{"contract"});
    EXPECT_EQ(plan.steps[0].filter.semantic_types, std::set<std::string>{"topic"});
    EXPECT_EQ(plan.steps[1].goal, Goal::Concept);
    EXPECT_EQ(plan.steps[1].seed_tags.front(), "risk-clause");
    EXPECT_EQ(plan.steps[1].expansion, (std::vector<std::string>{"case-log", "litigation"}));
    EXPECT_EQ(plan.steps[2].goal, Goal::Fact);
    EXPECT_EQ(plan.steps[2].query_text, "review contract risk clauses");
    EXPECT_EQ(plan.steps[2].k, 20U);
    EXPECT_EQ(index.resolve_path("review contract risk clauses"), plan);

    const auto results = index.execute(plan, "alice", ctx());
    ASSERT_EQ(results.size(), 3U);
    EXPECT_EQ(results[1].size(), 2U);
}

TEST(Plan, SingleWordAndEmpty)
{
    MemIndex index;
    const auto plan = index.resolve_path("contracts");
    ASSERT_EQ(plan.steps.size(), 3U);
    EXPECT_TRUE(plan.steps[1].seed_tags.empty());
    EXPECT_TRUE(plan.steps[1].expansion.empty());
    try {
        index.resolve_path("  ... ");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTask);
    }
}

Fingerprint axis(std::size_t i)
{
    Fingerprint f(kFingerprintDim, 0.0);
    f[i] = 1.0;
    return f;
}

TEST(HotCache, FiveTouchesInWindowPromote)
{
    HotCache cache;
    for (int i = 0; i < 4; ++i) cache.touch("c1", axis(1), t0().plus_seconds(i * 10));
    EXPECT_TRUE(cache.evaluate(t0().plus_seconds(40)).promoted.empty());
    cache.touch("c1", axis(1), t0().plus_seconds(50));
    const auto ch = cache.evaluate(t0().plus_seconds(55));
    EXPECT_EQ(ch.promoted, std::vector<CubeId>{"c1"});
    EXPECT_TRUE(cache.is_hot("c1"));
    // Touches spread over more than W do not promote.
    HotCache slow;
    for (int i = 0; i < 5; ++i) slow.touch("c2", axis(1), t0().plus_seconds(i * 20));
    EXPECT_TRUE(slow.evaluate(t0().plus_seconds(80)).promoted.empty());
}

TEST(HotCache, NoTouchesNoChange)
{
    HotCache cache;
    EXPECT_EQ(cache.evaluate(t0()), CacheChanges{});
}

TEST(HotCache, DriftInvalidates)
{
    HotCache cache;
    for (int i = 0; i < 5; ++i) cache.touch("c1", axis(1), t0().plus_seconds(i));
    ASSERT_EQ(cache.evaluate(t0().plus_seconds(5)).promoted.size(), 1U);
    for (int q = 0; q < 10; ++q) cache.note_query(axis(2 + q), t0().plus_seconds(6 + q));
    // Centroid of ten orthogonal queries has cosine 0 with the entry.
    const auto ch = cache.evaluate(t0().plus_seconds(20));
    EXPECT_EQ(ch.invalidated, std::vector<CubeId>{"c1"});
    EXPECT_FALSE(cache.is_hot("c1"));
}

TEST(HotCache, ColdRateInvalidates)
{
    HotCache cache;
    for (int i = 0; i < 5; ++i) cache.touch("c1", axis(1), t0().plus_seconds(i));
    cache.evaluate(t0().plus_seconds(5));
    EXPECT_TRUE(cache.evaluate(t0().plus_seconds(30)).invalidated.empty());
    EXPECT_EQ(cache.evaluate(t0().plus_seconds(100)).invalidated, std::vector<CubeId>{"c1"});
}

}  // namespace
}  // namespace memkernel
