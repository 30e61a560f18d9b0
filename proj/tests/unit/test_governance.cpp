// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/governance/governance.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <thread>

namespace memkernel {
namespace {

using testing::make_cube;
using testing::t0;

CallContext ctx() { return CallContext{"s-1", "care", "web", t0()}; }

TEST(Access, NonPhysicianDeniedOnPrivateClinicCube)
{
    IdGenerator ids(4);
    MemCube c = make_cube(ids, "diagnostic record for patient", t0(), "clinic", "dr-house");
    c.header.acl.readers = {"dr-wilson"};
    EXPECT_EQ(decide_access("receptionist", c, ctx(), AccessOp::Read), AccessDecision::deny("NOT_READER"));
    EXPECT_TRUE(decide_access("dr-wilson", c, ctx(), AccessOp::Read).allowed);
}

TEST(Access, OwnerReadsOwnCube)
{
    IdGenerator ids(4);
    const MemCube c = make_cube(ids, "x");
    EXPECT_EQ(decide_access("alice", c, ctx(), AccessOp::Read), AccessDecision::allow());
}

TEST(Access, ReaderWritingReadOnlyCube)
{
    IdGenerator ids(4);
    MemCube c = make_cube(ids, "x");
    c.header.acl.share_scope = ShareScope::ReadOnly;
    c.header.acl.readers = {"bob"};
    EXPECT_EQ(decide_access("bob", c, ctx(), AccessOp::Write), AccessDecision::deny("READ_ONLY"));
}

TEST(Access, OwnerCannotWriteFrozen)
{
    IdGenerator ids(4);
    MemCube c = make_cube(ids, "x");
    c.header.state = LifecycleState::frozen(StateKind::Activated);
    EXPECT_EQ(decide_access("alice", c, ctx(), AccessOp::Write), AccessDecision::deny("FROZEN"));
    EXPECT_TRUE(decide_access("alice", c, ctx(), AccessOp::Read).allowed);
}

// Direct predicate evaluation, written from the policy statement.
bool oracle_allowed(const Identity& a, const MemCube& c, AccessOp op)
{
    const auto& acl = c.header.acl;
    const bool frozen = c.header.state.kind == StateKind::Frozen;
    if (a == acl.owner) return !(op == AccessOp::Write && frozen);
    if (op == AccessOp::Write) {
        return acl.writers.count(a) == 1 && acl.share_scope != ShareScope::ReadOnly && !frozen;
    }
    const bool reader = acl.readers_wildcard || acl.readers.count(a) == 1;
    const bool scope_ok = acl.share_scope == ShareScope::Shared || acl.share_scope == ShareScope::ReadOnly;
    const bool layer_ok = c.header.layer == MemoryLayer::Shared || c.header.layer == MemoryLayer::Global;
    return reader || (scope_ok && layer_ok);
}

TEST(Access, FuzzAgainstTruthTable)
{
    const std::vector<Identity> people{"alice", "bob", "carol", "dave"};
    const ShareScope scopes[] = {ShareScope::Private, ShareScope::Shared, ShareScope::ReadOnly};
    const MemoryLayer layers[] = {MemoryLayer::Private, MemoryLayer::Shared, MemoryLayer::Global};
    const AccessOp ops[] = {AccessOp::Read, AccessOp::Write, AccessOp::Export};
    std::mt19937_64 rng(2026);
    IdGenerator ids(9);
    const MemCube base = make_cube(ids, "fuzz");
    for (int i = 0; i < 1000; ++i) {
        MemCube c = base;
        auto& acl = c.header.acl;
        acl.owner = people[rng() % people.size()];
        acl.share_scope = scopes[rng() % 3];
        acl.readers_wildcard = rng() % 5 == 0;
        acl.readers.clear();
        acl.writers = {acl.owner};
        for (const auto& p : people) {
            if (rng() % 2) acl.readers.insert(p);
            if (acl.share_scope != ShareScope::ReadOnly && rng() % 3 == 0) acl.writers.insert(p);
        }
        c.header.layer = layers[rng() % 3];
        c.header.state = rng() % 4 == 0 ? LifecycleState::frozen(StateKind::Generated)
                                        : LifecycleState::of(StateKind::Activated);
        const Identity actor = people[rng() % people.size()];
        const AccessOp op = ops[rng() % 3];
        const auto d = decide_access(actor, c, ctx(), op);
        ASSERT_EQ(d.allowed, oracle_allowed(actor, c, op)) << "iteration " << i;
        ASSERT_EQ(d.allowed, d.reason.empty());
    }
}

AuditRecord rec(const Identity& actor, const CubeId& id, AuditOp op, Timestamp at)
{
    AuditRecord r;
    r.at = at;
    r.actor = actor;
    r.cube_id = id;
    r.op = op;
    r.context = ctx();
    r.detail = "test";
    return r;
}

TEST(Audit, AppendThreeQueryAll)
{
    AuditLog log;
    for (int i = 0; i < 3; ++i) log.append(rec("alice", "c", AuditOp::Read, t0()));
    std::vector<std::uint64_t> seqs;
    for (const auto& r : log.query({})) seqs.push_back(r.seq);
    EXPECT_EQ(seqs, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Audit, QueryMatchesLinearScan)
{
    AuditLog log;
    std::mt19937_64 rng(5);
    const std::vector<Identity> actors{"alice", "bob", "carol"};
    const AuditOp ops[] = {AuditOp::Create, AuditOp::Read, AuditOp::Update, AuditOp::Deny};
    std::vector<AuditRecord> mirror;
    for (int i = 0; i < 300; ++i) {
        auto r = rec(actors[rng() % 3], "c" + std::to_string(rng() % 5), ops[rng() % 4],
                     t0().plus_seconds(static_cast<double>(i)));
        r.seq = log.append(r);
        mirror.push_back(r);
    }
    for (const auto& actor : actors) {
        AuditFilter f;
        f.actor = actor;
        f.from = t0().plus_seconds(50);
        f.to = t0().plus_seconds(250);
        std::vector<AuditRecord> expected;
        for (const auto& r : mirror) {
            if (r.actor == actor && !(r.at < t0().plus_seconds(50)) && r.at < t0().plus_seconds(250)) {
                expected.push_back(r);
            }
        }
        EXPECT_EQ(log.query(f), expected);
    }
}

TEST(Audit, GaplessUnderConcurrentAppenders)
{
    AuditLog log;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&log, t] {
            for (int i = 0; i < 250; ++i) log.append(rec("t" + std::to_string(t), "c", AuditOp::Read, t0()));
        });
    }
    for (auto& th : threads) th.join();
    const auto all = log.records();
    ASSERT_EQ(all.size(), 2000U);
    for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i].seq, i + 1);
}

TEST(Audit, CrashRecoveryReplay)
{
    const auto dir = std::filesystem::temp_directory_path() / "memkernel-audit-test";
    std::filesystem::remove_all(dir);
    const auto file = dir / "audit.log";
    std::vector<AuditRecord> written;
    {
        AuditLog log(file);
        for (int i = 0; i < 20; ++i) {
            auto r = rec("alice", "c", AuditOp::Update, t0().plus_seconds(i));
            r.seq = log.append(r);
            written.push_back(r);
        }
    }
    {
        // Simulate a torn write of a 21st record.
        std::ofstream out(file, std::ios::app | std::ios::binary);
        out << "{\"actor\":\"alice\",\"at\":";
    }
    // Re-read the file independently.
    std::ifstream in(file);
    std::string line;
    std::uint64_t expect = 1;
    int complete = 0;
    while (std::getline(in, line)) {
        if (in.eof()) break;
        EXPECT_EQ(Json::parse(line).at("seq").get<std::uint64_t>(), expect++);
        ++complete;
    }
    EXPECT_EQ(complete, 20);
    AuditLog replayed(file);
    EXPECT_EQ(replayed.records(), written);
    EXPECT_EQ(replayed.append(rec("bob", "c", AuditOp::Read, t0())), 21U);
    AuditLog again(file);
    EXPECT_EQ(again.size(), 21U);
    std::filesystem::remove_all(dir);
}

SensitivityRuleset id_rules()
{
    SensitivityRuleset r;
    r.id = "clinic-v1";
    r.rules.push_back({"id-number", R"(\b\d{3}-\d{2}-\d{4}\b)"});
    r.mask_whole_text_tags = {"phi"};
    return r;
}

TEST(Redact, NationalIdSpanMasked)
{
    IdGenerator ids(3);
    const MemCube c = make_cube(ids, "patient id 123-45-6789 on metformin");
    const Redactor red(id_rules());
    const MemCube out = red.redact(c);
    // Standalone rule engine over the fixture.
    const std::string expected =
        std::regex_replace(std::string("patient id 123-45-6789 on metformin"), std::regex(R"(\b\d{3}-\d{2}-\d{4}\b)"),
                           std::string(kMaskToken));
    EXPECT_EQ(out.plaintext()->text, expected);
    EXPECT_EQ(c.plaintext()->text, "patient id 123-45-6789 on metformin");
    EXPECT_TRUE(validate(out).empty());
    EXPECT_EQ(out.header.version_chain.back().snapshot_digest, payload_digest(out.payload));
}

TEST(Redact, NoMatchIsIdentical)
{
    IdGenerator ids(3);
    const MemCube c = make_cube(ids, "nothing sensitive here");
    EXPECT_EQ(Redactor(id_rules()).redact(c), c);
}

TEST(Redact, TaggedCubeMaskedWhole)
{
    IdGenerator ids(3);
    MemCube c = make_cube(ids, "any text at all");
    c.header.compliance.sensitivity = {"phi"};
    EXPECT_EQ(Redactor(id_rules()).redact(c).plaintext()->text, std::string(kMaskToken));
}

TEST(Redact, Idempotent)
{
    std::mt19937_64 rng(8);
    IdGenerator ids(3);
    SensitivityRuleset rules = id_rules();
    rules.rules.push_back({"vendor", "vend[a-z]+"});
    rules.rules.push_back({"pair", "x.y"});
    const Redactor red(rules);
    for (int i = 0; i < 200; ++i) {
        std::string text = testing::random_text(rng) + " 555-12-3456 xaxyy";
        const MemCube once = red.redact(make_cube(ids, text));
        EXPECT_EQ(red.redact(once), once);
        EXPECT_FALSE(red.matches_any(canonical_encode(once)));
    }
}

TEST(Redact, RejectsRuleMatchingMask)
{
    SensitivityRuleset r;
    r.rules.push_back({"any", "."});
    EXPECT_THROW(Redactor{r}, Error);
    r.rules = {{"bad", "("}};
    EXPECT_THROW(Redactor{r}, Error);
}

TEST(Watermark, DeterministicAndVerifiable)
{
    IdGenerator ids(3);
    const MemCube c = make_cube(ids, "licensed memory pack");
    const MemCube a = apply_watermark(c, "acme", "salt-1");
    const MemCube b = apply_watermark(c, "acme", "salt-1");
    ASSERT_TRUE(a.header.compliance.watermark.has_value());
    EXPECT_EQ(a.header.compliance.watermark->digest, b.header.compliance.watermark->digest);
    EXPECT_TRUE(verify_watermark(a));
    EXPECT_TRUE(verify_watermark(a.header.compliance.watermark->digest, "acme", a));
    EXPECT_FALSE(verify_watermark(a.header.compliance.watermark->digest, "other", a));

    // Recompute from the definition.
    const std::string concat =
        std::string("acme") +
        std::string(reinterpret_cast<const char*>(payload_digest(c.payload).bytes.data()), 32) + "salt-1";
    EXPECT_EQ(a.header.compliance.watermark->digest, sha256(concat));
}

TEST(Watermark, OneByteChangeDiffers)
{
    IdGenerator ids(3);
    const MemCube c = make_cube(ids, "licensed memory pack");
    const MemCube d = make_cube(ids, "licensed memory pacK");
    const auto wc = apply_watermark(c, "acme", "s").header.compliance.watermark->digest;
    const auto wd = apply_watermark(d, "acme", "s").header.compliance.watermark->digest;
    EXPECT_NE(wc, wd);
    MemCube tampered = apply_watermark(c, "acme", "s");
    std::get<PlaintextPayload>(tampered.payload).text += "!";
    EXPECT_FALSE(verify_watermark(tampered));
}

TEST(Watermark, FrozenRejected)
{
    IdGenerator ids(3);
    MemCube c = make_cube(ids, "x");
    c.header.state = LifecycleState::frozen(StateKind::Generated);
    try {
        apply_watermark(c, "acme", "s");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FrozenViolation);
    }
}

}  // namespace
}  // namespace memkernel
