// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// The kernel facade: one object owning the vault, the index, the audit log,
// the scheduler and the exchange. Every public operation below the
// "audited" marker appends exactly one audit record, denied calls included.
// Pipelines append one record per executed step.

#include "memkernel/core/cube.hpp"
#include "memkernel/core/ids.hpp"
#include "memkernel/governance/governance.hpp"
#include "memkernel/interchange/interchange.hpp"
#include "memkernel/interface/pipeline.hpp"
#include "memkernel/interface/reader.hpp"
#include "memkernel/lifecycle/lifecycle.hpp"
#include "memkernel/operator/operator.hpp"
#include "memkernel/scheduler/scheduler.hpp"
#include "memkernel/vault/vault.hpp"

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace memkernel {

struct KernelConfig {
    std::string deployment_id = "local";
    std::set<Identity> admins;
    ScheduleWeights weights;
    MigrationRule rule;
    HotCacheConfig cache;
    SensitivityRuleset ruleset;
    std::optional<std::filesystem::path> audit_file;
    std::optional<std::filesystem::path> exchange_file;
    bool recover = false;       // truncate torn log tails instead of failing
    std::uint64_t id_seed = 0;  // 0: seeded from std::random_device
};

enum class UpdateMode { Append, Merge, Overwrite };
std::string_view to_string(UpdateMode m) noexcept;
UpdateMode parse_update_mode(std::string_view s);  // throws Error(BadArgs)

inline constexpr std::string_view kAppendSeparator = "\n";

struct UpdateRequest {
    CubeId cube_id;
    UpdateMode mode = UpdateMode::Append;
    std::string content;          // Append / Overwrite
    std::vector<CubeId> sources;  // Merge
    std::uint64_t expected_version = 0;
    std::string label;  // optional snapshot label
};

struct ProvenanceInput {
    std::string trigger;
    std::string context;
    std::string model_id;
    std::vector<std::string> external_links;
};

struct PublishResult {
    Listing listing;
    std::vector<Delivery> deliveries;
};

struct PipelineHooks {
    // Called before each step runs; throwing fails that step.
    std::function<void(std::size_t index, const PipelineStep& step)> before_step;
};

class Kernel {
public:
    Kernel(KernelConfig config, const Clock& clock, const Embedder& embedder = default_embedder(),
           const InferenceEngine& engine = mock_engine());

    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    // Setup and inspection; not audited.
    Namespace& open_namespace(const NamespaceDescriptor& desc);
    const KernelConfig& config() const { return config_; }
    Timestamp now() const { return clock_->now(); }
    const Vault& vault() const { return vault_; }
    const MemIndex& index() const { return index_; }
    const AuditLog& audit() const { return *audit_; }
    const Exchange& exchange() const { return *exchange_; }
    const Scheduler& scheduler() const { return scheduler_; }
    const Redactor& redactor() const { return redactor_; }
    const Embedder& embedder() const { return *embedder_; }
    // Sha256 over the canonical encodings of every stored cube, in id order.
    Digest state_digest() const;
    std::vector<Timestamp> accesses(const CubeId& id) const;
    std::optional<CubeId> twin_of(const CubeId& source) const;
    // Seq of the last audit record appended by the calling thread.
    static std::uint64_t last_audit_seq() noexcept;
    static void clear_last_audit_seq() noexcept;

    // One record for a call handled outside the kernel (a rejected envelope
    // or a harness op), so that front ends keep one record per call.
    std::uint64_t audit_external(const Identity& actor, const CallContext& ctx, AuditOp op, std::string_view name,
                                 std::optional<ErrorCode> failure, std::string_view message = {});

    // ---- audited ----
    MemCube create(CubeDraft draft, const Identity& actor, const CallContext& ctx);
    // A read counts as an access: Access transition when the table allows it,
    // access_count and last_access bumped unless Frozen or Expired.
    MemCube get(const CubeId& id, const Identity& actor, const CallContext& ctx);
    std::vector<CubeId> list(const std::string& ns, const StructuredFilter& filter, const Identity& actor,
                             const CallContext& ctx);
    std::vector<CubeId> query_structured(const StructuredFilter& filter, const Identity& actor, const CallContext& ctx);
    std::vector<RankedHit> query_semantic(const std::string& text, std::size_t k, const Identity& actor,
                                          const CallContext& ctx);
    std::vector<RankedHit> query_hybrid(const StructuredFilter& filter, const std::string& text, std::size_t k,
                                        const Identity& actor, const CallContext& ctx);
    RetrievalPlan resolve_path(const std::string& task, const Identity& actor, const CallContext& ctx);
    MemoryCall parse(const std::string& prompt, const std::vector<MemoryCall>& dialogue, const Identity& actor,
                     const CallContext& ctx);

    std::uint64_t update(const UpdateRequest& req, const Identity& actor, const CallContext& ctx);
    std::string provenance(const CubeId& id, const ProvenanceInput& event, const Identity& actor,
                           const CallContext& ctx);
    TransitionResult transition(const CubeId& id, const LifecycleEvent& event, const Identity& actor,
                                const CallContext& ctx);
    MemCube rollback(const CubeId& id, std::uint64_t version, const Identity& actor, const CallContext& ctx);
    std::vector<TickChange> tick(const Identity& actor, const CallContext& ctx);
    MemCube watermark(const CubeId& id, const std::string& provider_id, const std::string& salt, const Identity& actor,
                      const CallContext& ctx);
    void migrate_tier(const CubeId& id, Tier target, const Identity& actor, const CallContext& ctx);

    InjectionPlan plan(const std::string& query_text, std::uint64_t budget_tokens, std::size_t k,
                       const Identity& actor, const CallContext& ctx);
    MemCube promote(const CubeId& id, const Identity& actor, const CallContext& ctx);
    MemCube demote(const CubeId& twin_id, const Identity& actor, const CallContext& ctx);
    MemCube distill(const std::vector<CubeId>& ids, const Identity& actor, const CallContext& ctx);
    MemCube offload(const CubeId& param_id, const Identity& actor, const CallContext& ctx);
    // `capacity` defaults to the namespace descriptor's capacity_cubes.
    EvictionResult evict(const std::string& ns, std::optional<std::size_t> capacity, const Identity& actor,
                         const CallContext& ctx);
    CacheChanges cache_evaluate(const Identity& actor, const CallContext& ctx);

    std::vector<AuditRecord> audit_query(const AuditFilter& filter, const Identity& actor, const CallContext& ctx);

    PipelineResult pipeline_run(const PipelineSpec& spec, const Identity& actor, const CallContext& ctx,
                                const PipelineHooks* hooks = nullptr);

    std::string dump(const StructuredFilter& selection, const DumpPolicy& policy, const Identity& actor,
                     const CallContext& ctx);
    std::vector<CubeId> load(std::string_view archive, const std::string& target_ns, const Identity& actor,
                             const CallContext& ctx);
    PublishResult publish(const CubeId& id, const Visibility& visibility, const License& license,
                          const Identity& actor, const CallContext& ctx);
    // With `install_ns`, the pulled snapshot is also imported there as a new cube.
    PullReceipt pull(const std::string& listing_id, const std::optional<std::string>& fee_token,
                     const std::optional<std::string>& install_ns, const Identity& actor, const CallContext& ctx);
    std::string subscribe(Subscription subscription, const Identity& actor, const CallContext& ctx);
    std::vector<Delivery> notify(const std::string& listing_id, const Identity& actor, const CallContext& ctx);
    std::vector<std::string> inbox(const std::string& subscription_id, const Identity& actor, const CallContext& ctx);

private:
    struct Call;
    template <typename F>
    auto audited(const Identity& actor, const CallContext& ctx, AuditOp op, std::string_view name, const CubeId& cube,
                 F&& body)
        -> decltype(body(std::declval<Call&>()));
    std::uint64_t append_audit(const AuditRecord& r);

    MemCube load_cube(const CubeId& id) const;  // throws UnknownCube
    void require(const Identity& actor, const MemCube& cube, const CallContext& ctx, AccessOp op) const;
    void require_namespace_write(const std::string& ns, const Identity& actor) const;
    void commit(const MemCube& cube);
    std::mutex& ns_mutex(const std::string& ns);
    std::vector<std::unique_lock<std::mutex>> lock_namespaces(std::set<std::string> names);
    void note_access(const CubeId& id, const CallContext& ctx, Timestamp now);

    MemCube apply_update(MemCube cube, const UpdateRequest& req, const Identity& actor, Timestamp now,
                         std::vector<MemCube>* merged_sources, const std::function<MemCube(const CubeId&)>& lookup) const;
    MemCube apply_provenance(MemCube cube, const ProvenanceInput& event, const Identity& actor, Timestamp now) const;

    KernelConfig config_;
    const Clock* clock_;
    const Embedder* embedder_;
    const InferenceEngine* engine_;
    std::unique_ptr<IdGenerator> ids_;
    Vault vault_;
    MemIndex index_;
    std::unique_ptr<AuditLog> audit_;
    std::unique_ptr<Exchange> exchange_;
    Redactor redactor_;
    Scheduler scheduler_;
    HotCache cache_;

    std::mutex ns_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> ns_locks_;

    mutable std::mutex access_mu_;
    std::map<CubeId, std::deque<Timestamp>> accesses_;
    std::map<CubeId, std::set<std::string>> sessions_;
    std::map<CubeId, CubeId> twins_;  // plaintext source -> activation twin
};

}  // namespace memkernel
