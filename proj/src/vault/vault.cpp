// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/vault/vault.hpp"

#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <mutex>

namespace memkernel {

namespace {

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) noexcept
{
    for (const auto& [k, n] : table) {
        if (k == v) return n;
    }
    return "?";
}

template <typename E, std::size_t N>
E parse_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s, const char* what)
{
    for (const auto& [k, n] : table) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::InvalidConfig, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<NamespaceKind, std::string_view>, 5> kNsKinds{{
    {NamespaceKind::UserPrivate, "UserPrivate"},
    {NamespaceKind::ExpertKnowledge, "ExpertKnowledge"},
    {NamespaceKind::IndustryShared, "IndustryShared"},
    {NamespaceKind::ContextPool, "ContextPool"},
    {NamespaceKind::PipelineCache, "PipelineCache"},
}};
constexpr std::array<std::pair<BackendKind, std::string_view>, 2> kBackends{{
    {BackendKind::InMemory, "InMemory"},
    {BackendKind::FileLog, "FileLog"},
}};
constexpr std::array<std::pair<FlushMode, std::string_view>, 2> kFlush{{
    {FlushMode::EveryWrite, "EveryWrite"},
    {FlushMode::Periodic, "Periodic"},
}};
constexpr std::array<std::pair<NamespaceMode, std::string_view>, 2> kModes{{
    {NamespaceMode::ReadOnlyCache, "ReadOnlyCache"},
    {NamespaceMode::WriteEnabled, "WriteEnabled"},
}};
constexpr std::array<std::pair<Tier, std::string_view>, 2> kTiers{{
    {Tier::Hot, "Hot"},
    {Tier::Cold, "Cold"},
}};

bool valid_namespace_name(std::string_view s)
{
    return !s.empty() && s.size() <= 128 && std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
               c == '.';
    }) && s != "." && s != "..";
}

[[noreturn]] void denied(const AccessDecision& d, const CubeId& id)
{
    throw Error(ErrorCode::AccessDenied, d.reason + " on " + id);
}

}  // namespace

std::string_view to_string(NamespaceKind k) noexcept { return name_of(kNsKinds, k); }
std::string_view to_string(BackendKind k) noexcept { return name_of(kBackends, k); }
std::string_view to_string(FlushMode k) noexcept { return name_of(kFlush, k); }
std::string_view to_string(NamespaceMode k) noexcept { return name_of(kModes, k); }
std::string_view to_string(Tier t) noexcept { return name_of(kTiers, t); }
NamespaceKind parse_namespace_kind(std::string_view s) { return parse_of(kNsKinds, s, "namespace kind"); }
BackendKind parse_backend_kind(std::string_view s) { return parse_of(kBackends, s, "backend"); }
NamespaceMode parse_namespace_mode(std::string_view s) { return parse_of(kModes, s, "namespace mode"); }
Tier parse_tier(std::string_view s)
{
    for (const auto& [k, n] : kTiers) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown tier '" + std::string(s) + "'");
}

void to_json(Json& j, const AdapterConfig& a)
{
    j = Json{{"backend", std::string(to_string(a.backend))}, {"flush", std::string(to_string(a.flush))}};
    if (a.backend == BackendKind::FileLog) j["directory"] = a.directory.string();
    if (a.flush == FlushMode::Periodic) j["flush_seconds"] = a.flush_seconds;
}

void from_json(const Json& j, AdapterConfig& a)
{
    a.backend = parse_backend_kind(j.value("backend", std::string("InMemory")));
    a.directory = j.value("directory", std::string{});
    a.flush = parse_of(kFlush, j.value("flush", std::string("EveryWrite")), "flush policy");
    a.flush_seconds = j.value("flush_seconds", 0.0);
}

void to_json(Json& j, const NamespaceDescriptor& d)
{
    j = Json{{"name", d.name},
             {"kind", std::string(to_string(d.kind))},
             {"adapter", d.adapter},
             {"mode", std::string(to_string(d.mode))}};
    if (d.capacity_cubes) j["capacity_cubes"] = *d.capacity_cubes;
}

void from_json(const Json& j, NamespaceDescriptor& d)
{
    d.name = j.at("name").get<std::string>();
    d.kind = parse_namespace_kind(j.value("kind", std::string("UserPrivate")));
    d.adapter = j.contains("adapter") ? j.at("adapter").get<AdapterConfig>() : AdapterConfig{};
    d.mode = parse_namespace_mode(j.value("mode", std::string("WriteEnabled")));
    d.capacity_cubes.reset();
    if (j.contains("capacity_cubes") && !j.at("capacity_cubes").is_null()) d.capacity_cubes = j.at("capacity_cubes").get<std::size_t>();
}

std::string encode_log_record(const LogRecord& r)
{
    const auto n = static_cast<std::uint32_t>(r.body.size());
    std::string out;
    out.reserve(5 + r.body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.push_back(static_cast<char>(r.kind));
    out += r.body;
    return out;
}

LogScan scan_log(std::string_view bytes)
{
    LogScan scan;
    std::uint64_t pos = 0;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 5) {
            scan.torn = pos;
            break;
        }
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
        const auto kind = p[4];
        if (kind > static_cast<std::uint8_t>(LogKind::Tier) || bytes.size() - pos - 5 < n) {
            scan.torn = pos;
            break;
        }
        scan.records.push_back(LogRecord{static_cast<LogKind>(kind), std::string(bytes.substr(pos + 5, n))});
        pos += 5 + n;
    }
    scan.valid_bytes = pos;
    return scan;
}

FileLogAdapter::FileLogAdapter(std::filesystem::path file, FlushMode flush, double flush_seconds, bool recover)
    : file_(std::move(file)), flush_(flush), flush_seconds_(flush_seconds), last_flush_(std::chrono::steady_clock::now())
{
    std::error_code ec;
    std::filesystem::create_directories(file_.parent_path(), ec);
    if (std::filesystem::exists(file_)) {
        std::ifstream in(file_, std::ios::binary);
        const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        LogScan scan = scan_log(bytes);
        if (scan.torn) {
            if (!recover) {
                throw DecodeError(*scan.torn, "torn record in " + file_.string(), ErrorCode::CorruptLog);
            }
            std::filesystem::resize_file(file_, scan.valid_bytes);
        }
        initial_ = std::move(scan.records);
    }
    out_ = std::fopen(file_.c_str(), "ab");
    if (out_ == nullptr) {
        throw Error(ErrorCode::AdapterUnavailable, "cannot open " + file_.string() + " for append");
    }
    count_ = initial_.size();
}

FileLogAdapter::~FileLogAdapter()
{
    if (out_ != nullptr) {
        std::fflush(out_);
        std::fclose(out_);
    }
}

void FileLogAdapter::append(const LogRecord& record)
{
    const std::string bytes = encode_log_record(record);
    if (std::fwrite(bytes.data(), 1, bytes.size(), out_) != bytes.size()) {
        throw Error(ErrorCode::AdapterUnavailable, "short write to " + file_.string());
    }
    ++count_;
    if (flush_ == FlushMode::EveryWrite) {
        flush();
    } else {
        const auto now = std::chrono::steady_clock::now();
        if (std::chrono::duration<double>(now - last_flush_).count() >= flush_seconds_) flush();
    }
}

std::vector<LogRecord> FileLogAdapter::replay() { return std::exchange(initial_, {}); }

void FileLogAdapter::flush()
{
    std::fflush(out_);
    last_flush_ = std::chrono::steady_clock::now();
}

void FileLogAdapter::rewrite(const std::vector<LogRecord>& records)
{
    const auto tmp = std::filesystem::path(file_.string() + ".compact");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& r : records) out << encode_log_record(r);
        out.flush();
        if (!out) throw Error(ErrorCode::AdapterUnavailable, "cannot write " + tmp.string());
    }
    std::fclose(out_);
    std::filesystem::rename(tmp, file_);
    out_ = std::fopen(file_.c_str(), "ab");
    if (out_ == nullptr) {
        throw Error(ErrorCode::AdapterUnavailable, "cannot reopen " + file_.string());
    }
    count_ = records.size();
}

std::optional<Tier> tier_for_state(const LifecycleState& s) noexcept
{
    switch (s.kind) {
    case StateKind::Activated: return Tier::Hot;
    case StateKind::Archived:
    case StateKind::Expired: return Tier::Cold;
    default: return std::nullopt;
    }
}

Namespace::Namespace(NamespaceDescriptor desc, std::unique_ptr<StorageAdapter> adapter)
    : desc_(std::move(desc)), adapter_(std::move(adapter))
{
    auto records = adapter_->replay();
    if (records.empty()) {
        adapter_->append(manifest());
        return;
    }
    std::uint64_t offset = 0;
    for (const auto& r : records) {
        try {
            apply(r, true);
        } catch (const Error& e) {
            throw DecodeError(offset, "bad record in namespace " + desc_.name + ": " + e.what(), ErrorCode::CorruptLog);
        } catch (const std::exception& e) {
            throw DecodeError(offset, "bad record in namespace " + desc_.name + ": " + e.what(), ErrorCode::CorruptLog);
        }
        offset += 5 + r.body.size();
    }
}

LogRecord Namespace::manifest() const
{
    Json m{{"format", "memkernel-vault/1"}, {"namespace", desc_.name}, {"kind", std::string(to_string(desc_.kind))},
           {"mode", std::string(to_string(desc_.mode))}};
    return LogRecord{LogKind::Manifest, canonical_dump(m)};
}

void Namespace::apply(const LogRecord& r, bool replaying)
{
    switch (r.kind) {
    case LogKind::Manifest: {
        const Json m = parse_canonical(r.body);
        if (replaying && m.at("namespace").get<std::string>() != desc_.name) {
            throw Error(ErrorCode::CorruptLog, "manifest names namespace " + m.at("namespace").get<std::string>());
        }
        break;
    }
    case LogKind::Put: {
        MemCube c = canonical_decode(r.body);
        auto it = latest_.find(c.cube_id);
        Tier tier = it == latest_.end() ? Tier::Hot : it->second.tier;
        const bool state_changed = it == latest_.end() || !(it->second.cube.header.state == c.header.state);
        if (state_changed) {
            if (const auto t = tier_for_state(c.header.state)) tier = *t;
        }
        if (c.header.state.kind == StateKind::Archived || c.header.state.kind == StateKind::Expired) tier = Tier::Cold;
        const CubeId id = c.cube_id;
        versions_[id][c.version()] = c;
        latest_[id] = StoredCube{std::move(c), tier};
        break;
    }
    case LogKind::Tier: {
        const Json t = parse_canonical(r.body);
        const CubeId id = t.at("id").get<std::string>();
        auto it = latest_.find(id);
        if (it == latest_.end()) throw Error(ErrorCode::CorruptLog, "tier record for unknown cube " + id);
        it->second.tier = parse_tier(t.at("tier").get<std::string>());
        break;
    }
    }
}

void Namespace::write(LogRecord r)
{
    adapter_->append(r);
    apply(r, false);
}

std::uint64_t Namespace::put(const MemCube& cube)
{
    std::unique_lock lock(mu_);
    if (const auto it = latest_.find(cube.cube_id); it != latest_.end()) {
        const auto& stored = it->second.cube.header.version_chain;
        const auto& incoming = cube.header.version_chain;
        const bool extends = incoming.size() >= stored.size() && std::equal(stored.begin(), stored.end(), incoming.begin());
        if (!extends) {
            throw Error(ErrorCode::VersionConflict, cube.cube_id + ": stored v" + std::to_string(stored.size()) +
                                                        " is not a prefix of the incoming chain");
        }
    }
    write(LogRecord{LogKind::Put, canonical_encode(cube)});
    return cube.version();
}

std::optional<StoredCube> Namespace::find(const CubeId& id) const
{
    std::shared_lock lock(mu_);
    const auto it = latest_.find(id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::optional<MemCube> Namespace::at_version(const CubeId& id, std::uint64_t version) const
{
    std::shared_lock lock(mu_);
    const auto it = versions_.find(id);
    if (it == versions_.end()) return std::nullopt;
    const auto v = it->second.find(version);
    if (v == it->second.end()) return std::nullopt;
    return v->second;
}

std::vector<CubeId> Namespace::ids() const
{
    std::shared_lock lock(mu_);
    std::vector<CubeId> out;
    for (const auto& [id, _] : latest_) out.push_back(id);
    return out;
}

std::vector<StoredCube> Namespace::snapshot() const
{
    std::shared_lock lock(mu_);
    std::vector<StoredCube> out;
    for (const auto& [_, s] : latest_) out.push_back(s);
    return out;
}

bool Namespace::contains(const CubeId& id) const
{
    std::shared_lock lock(mu_);
    return latest_.contains(id);
}

std::size_t Namespace::size() const
{
    std::shared_lock lock(mu_);
    return latest_.size();
}

std::size_t Namespace::occupancy() const
{
    std::shared_lock lock(mu_);
    return static_cast<std::size_t>(std::count_if(latest_.begin(), latest_.end(), [](const auto& kv) {
        const auto k = kv.second.cube.header.state.kind;
        return k != StateKind::Archived && k != StateKind::Expired;
    }));
}

void Namespace::migrate_tier(const CubeId& id, Tier target)
{
    std::unique_lock lock(mu_);
    const auto it = latest_.find(id);
    if (it == latest_.end()) throw Error(ErrorCode::UnknownCube, id);
    const auto& cube = it->second.cube;
    const auto k = cube.header.state.kind;
    if (target == Tier::Hot && (k == StateKind::Archived || k == StateKind::Expired)) {
        throw Error(ErrorCode::IllegalTier, id + " is " + state_name(cube.header.state) + "; restore it first");
    }
    if (payload_digest(cube.payload) != cube.header.version_chain.back().snapshot_digest) {
        throw Error(ErrorCode::Internal, "payload digest mismatch for " + id);
    }
    if (it->second.tier == target) return;
    write(LogRecord{LogKind::Tier, canonical_dump(Json{{"id", id}, {"tier", std::string(to_string(target))}})});
}

void Namespace::flush()
{
    std::unique_lock lock(mu_);
    adapter_->flush();
}

void Namespace::compact()
{
    std::unique_lock lock(mu_);
    std::vector<LogRecord> records{manifest()};
    for (const auto& [id, versions] : versions_) {
        for (const auto& [v, cube] : versions) records.push_back(LogRecord{LogKind::Put, canonical_encode(cube)});
        const auto& latest = latest_.at(id);
        records.push_back(
            LogRecord{LogKind::Tier, canonical_dump(Json{{"id", id}, {"tier", std::string(to_string(latest.tier))}})});
    }
    adapter_->rewrite(records);
}

std::size_t Namespace::log_records() const
{
    std::shared_lock lock(mu_);
    return adapter_->record_count();
}

Vault::Vault(std::set<Identity> admins, bool recover) : admins_(std::move(admins)), recover_(recover) {}

Namespace& Vault::open_namespace(const NamespaceDescriptor& desc)
{
    if (!valid_namespace_name(desc.name)) {
        throw Error(ErrorCode::InvalidConfig, "invalid namespace name '" + desc.name + "'");
    }
    std::unique_lock lock(mu_);
    if (const auto it = namespaces_.find(desc.name); it != namespaces_.end()) {
        if (!(it->second->descriptor() == desc)) {
            throw Error(ErrorCode::InvalidConfig, "namespace " + desc.name + " already open with another descriptor");
        }
        return *it->second;
    }
    std::unique_ptr<StorageAdapter> adapter;
    if (desc.adapter.backend == BackendKind::FileLog) {
        if (desc.adapter.directory.empty()) {
            throw Error(ErrorCode::AdapterUnavailable, "FileLog namespace " + desc.name + " has no directory");
        }
        adapter = std::make_unique<FileLogAdapter>(desc.adapter.directory / (desc.name + ".mklog"), desc.adapter.flush,
                                                   desc.adapter.flush_seconds, recover_);
    } else {
        adapter = std::make_unique<InMemoryAdapter>();
    }
    auto ns = std::make_unique<Namespace>(desc, std::move(adapter));
    for (const auto& id : ns->ids()) {
        const auto [it, fresh] = home_.emplace(id, desc.name);
        if (!fresh && it->second != desc.name) {
            throw Error(ErrorCode::CorruptLog, "cube " + id + " present in namespaces " + it->second + " and " + desc.name);
        }
    }
    auto& ref = *ns;
    namespaces_.emplace(desc.name, std::move(ns));
    return ref;
}

Namespace& Vault::ns(const std::string& name)
{
    std::shared_lock lock(mu_);
    const auto it = namespaces_.find(name);
    if (it == namespaces_.end()) throw Error(ErrorCode::UnknownNamespace, name);
    return *it->second;
}

const Namespace& Vault::ns(const std::string& name) const { return const_cast<Vault*>(this)->ns(name); }

bool Vault::has_namespace(const std::string& name) const
{
    std::shared_lock lock(mu_);
    return namespaces_.contains(name);
}

std::vector<std::string> Vault::namespace_names() const
{
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [n, _] : namespaces_) out.push_back(n);
    return out;
}

std::uint64_t Vault::put(const std::string& name, const MemCube& cube, const Identity& actor, const CallContext& ctx)
{
    Namespace& n = ns(name);
    if (cube.header.namespace_name != name) {
        throw Error(ErrorCode::InvalidPayload, "cube " + cube.cube_id + " belongs to namespace " + cube.header.namespace_name);
    }
    if (n.descriptor().mode == NamespaceMode::ReadOnlyCache && !is_admin(actor)) {
        throw Error(ErrorCode::ReadOnlyNamespace, name);
    }
    // Writes are checked against the stored policy; a new cube against its own.
    if (const auto existing = n.find(cube.cube_id)) {
        const auto d = decide_access(actor, existing->cube, ctx, AccessOp::Write);
        if (!d.allowed) denied(d, cube.cube_id);
    } else {
        const auto d = decide_access(actor, cube, ctx, AccessOp::Write);
        if (!d.allowed) denied(d, cube.cube_id);
    }
    return store(cube);
}

MemCube Vault::get(const std::string& name, const CubeId& id, const Identity& actor, const CallContext& ctx) const
{
    const auto found = ns(name).find(id);
    if (!found) throw Error(ErrorCode::UnknownCube, id);
    const auto d = decide_access(actor, found->cube, ctx, AccessOp::Read);
    if (!d.allowed) denied(d, id);
    return found->cube;
}

std::vector<CubeId> Vault::list(const std::string& name, const std::function<bool(const MemCube&)>& filter,
                                const Identity& actor, const CallContext& ctx) const
{
    std::vector<CubeId> out;
    for (const auto& s : ns(name).snapshot()) {
        if (!decide_access(actor, s.cube, ctx, AccessOp::Read).allowed) continue;
        if (!filter || filter(s.cube)) out.push_back(s.cube.cube_id);
    }
    return out;
}

void Vault::migrate_tier(const std::string& name, const CubeId& id, Tier target) { ns(name).migrate_tier(id, target); }

std::uint64_t Vault::store(const MemCube& cube)
{
    const std::string& name = cube.header.namespace_name;
    Namespace& n = ns(name);
    {
        std::unique_lock lock(mu_);
        const auto [it, fresh] = home_.emplace(cube.cube_id, name);
        if (!fresh && it->second != name) {
            throw Error(ErrorCode::VersionConflict, cube.cube_id + " already lives in namespace " + it->second);
        }
    }
    return n.put(cube);
}

std::optional<std::string> Vault::namespace_of(const CubeId& id) const
{
    std::shared_lock lock(mu_);
    const auto it = home_.find(id);
    if (it == home_.end()) return std::nullopt;
    return it->second;
}

std::optional<StoredCube> Vault::find(const CubeId& id) const
{
    const auto home = namespace_of(id);
    if (!home) return std::nullopt;
    return ns(*home).find(id);
}

std::vector<StoredCube> Vault::all() const
{
    std::vector<StoredCube> out;
    for (const auto& name : namespace_names()) {
        auto part = ns(name).snapshot();
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    std::sort(out.begin(), out.end(), [](const StoredCube& a, const StoredCube& b) { return a.cube.cube_id < b.cube.cube_id; });
    return out;
}

std::optional<MemoryPayload> Vault::payload_at(const CubeId& id, std::uint64_t version) const
{
    const auto home = namespace_of(id);
    if (!home) return std::nullopt;
    const auto c = ns(*home).at_version(id, version);
    if (!c) return std::nullopt;
    return c->payload;
}

void Vault::flush_all()
{
    for (const auto& name : namespace_names()) ns(name).flush();
}

}  // namespace memkernel
