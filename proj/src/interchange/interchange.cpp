// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/interchange/interchange.hpp"

#include "memkernel/core/cube.hpp"
#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace memkernel {

namespace {

void put_u32(std::string& out, std::size_t n)
{
    if (n > 0xFFFFFFFFULL) throw Error(ErrorCode::BadArgs, "archive section too large");
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
}

void put_section(std::string& out, const std::string& body)
{
    put_u32(out, body.size());
    out += body;
}

std::vector<std::string_view> read_sections(std::string_view bytes, std::size_t offset)
{
    std::vector<std::string_view> out;
    while (offset < bytes.size()) {
        if (bytes.size() - offset < 4) throw DecodeError(offset, "truncated section length");
        std::uint32_t n = 0;
        for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
        offset += 4;
        if (bytes.size() - offset < n) throw DecodeError(offset, "section runs past end of archive");
        out.push_back(bytes.substr(offset, n));
        offset += n;
    }
    return out;
}

std::string redact_record_text(const Redactor& r, const std::string& s) { return r.redact_text(s); }

AuditRecord redact_record(const AuditRecord& in, const Redactor& r)
{
    AuditRecord out = in;
    out.actor = redact_record_text(r, in.actor);
    out.cube_id = redact_record_text(r, in.cube_id);
    out.context.session_id = redact_record_text(r, in.context.session_id);
    out.context.purpose = redact_record_text(r, in.context.purpose);
    out.context.platform = redact_record_text(r, in.context.platform);
    out.reason = redact_record_text(r, in.reason);
    out.detail = redact_record_text(r, in.detail);
    return out;
}

constexpr std::array<std::pair<VisibilityKind, std::string_view>, 2> kVisibility{{
    {VisibilityKind::Public, "Public"},
    {VisibilityKind::Allowlist, "Allowlist"},
}};
constexpr std::array<std::pair<DeliveryMode, std::string_view>, 2> kDelivery{{
    {DeliveryMode::Push, "Push"},
    {DeliveryMode::Pull, "Pull"},
}};

}  // namespace

void to_json(Json& j, const ArchiveManifest& m)
{
    j = Json{{"format_version", m.format_version},
             {"created_at", m.created_at},
             {"source_deployment", m.source_deployment},
             {"digest_algorithm", m.digest_algorithm},
             {"cube_count", m.cube_count},
             {"ruleset_id", m.ruleset_id}};
}

void from_json(const Json& j, ArchiveManifest& m)
{
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.created_at = j.at("created_at").get<Timestamp>();
    m.source_deployment = j.at("source_deployment").get<std::string>();
    m.digest_algorithm = j.at("digest_algorithm").get<std::string>();
    m.cube_count = j.at("cube_count").get<std::uint64_t>();
    m.ruleset_id = j.at("ruleset_id").get<std::string>();
}

std::string encode_archive(const Archive& archive)
{
    std::string out(kArchiveMagicPrefix);
    out += std::to_string(archive.manifest.format_version) + "\n";
    put_section(out, canonical_dump(Json(archive.manifest)));
    for (const auto& e : archive.entries) {
        put_section(out, canonical_dump(Json{{"cube", Json(e.cube)}, {"permissions", e.permissions}}));
    }
    Json audit = Json::array();
    for (const auto& r : archive.audit) audit.push_back(Json(r));
    put_section(out, canonical_dump(audit));
    return out;
}

Archive decode_archive(std::string_view bytes)
{
    if (!bytes.starts_with(kArchiveMagicPrefix)) throw DecodeError(0, "not a memkernel archive");
    const auto nl = bytes.find('\n');
    if (nl == std::string_view::npos) throw DecodeError(bytes.size(), "archive header is not terminated");
    const auto vtext = bytes.substr(kArchiveMagicPrefix.size(), nl - kArchiveMagicPrefix.size());
    std::uint32_t version = 0;
    const auto [p, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), version);
    if (ec != std::errc{} || p != vtext.data() + vtext.size()) {
        throw DecodeError(kArchiveMagicPrefix.size(), "bad archive format version");
    }
    if (version != kArchiveFormatVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "archive format version " + std::to_string(version));
    }

    const auto sections = read_sections(bytes, nl + 1);
    if (sections.size() < 2) throw Error(ErrorCode::ManifestMismatch, "archive needs a manifest and an audit section");

    Archive a;
    try {
        a.manifest = parse_canonical(sections.front()).get<ArchiveManifest>();
    } catch (const Json::exception& e) {
        throw DecodeError(nl + 1, std::string("manifest: ") + e.what());
    }
    if (a.manifest.format_version != version) {
        throw Error(ErrorCode::ManifestMismatch, "manifest format version differs from header");
    }
    const std::size_t n_entries = sections.size() - 2;
    if (a.manifest.cube_count != n_entries) {
        throw Error(ErrorCode::ManifestMismatch, "manifest counts " + std::to_string(a.manifest.cube_count) +
                                                     " cubes, archive holds " + std::to_string(n_entries));
    }
    for (std::size_t i = 0; i < n_entries; ++i) {
        const std::string_view s = sections[i + 1];
        const Json j = parse_canonical(s);
        if (!j.is_object() || !j.contains("cube")) {
            throw Error(ErrorCode::ValidationFailed, "entry " + std::to_string(i) + ": missing cube");
        }
        ArchiveEntry e;
        e.cube = canonical_decode(canonical_dump(j.at("cube")));
        e.permissions = j.value("permissions", Json::object());
        a.entries.push_back(std::move(e));
    }
    const Json audit = parse_canonical(sections.back());
    if (!audit.is_array()) throw Error(ErrorCode::ManifestMismatch, "audit section is not a list");
    for (const auto& r : audit) a.audit.push_back(r.get<AuditRecord>());
    return a;
}

std::string build_archive(std::span<const MemCube> cubes, const Redactor& redactor, const std::string& deployment,
                          const Identity& actor, Timestamp now, std::span<const AuditRecord> audit,
                          const Embedder& embedder)
{
    Archive a;
    a.manifest.created_at = now;
    a.manifest.source_deployment = deployment;
    a.manifest.cube_count = cubes.size();
    a.manifest.ruleset_id = redactor.ruleset().id;
    for (const auto& c : cubes) {
        ArchiveEntry e;
        e.cube = redactor.redact(c, embedder);
        e.permissions = Json{{"acl", Json(e.cube.header.acl)},
                             {"layer", std::string(to_string(e.cube.header.layer))},
                             {"exported_by", actor}};
        a.entries.push_back(std::move(e));
    }
    for (const auto& r : audit) a.audit.push_back(redact_record(r, redactor));
    std::string bytes = encode_archive(a);
    if (redactor.matches_any(bytes)) {
        throw Error(ErrorCode::ValidationFailed, "archive still matches an active sensitivity rule");
    }
    return bytes;
}

std::string import_reference(const std::string& deployment, const CubeId& id) { return deployment + ":" + id; }

std::vector<MemCube> import_archive(const Archive& archive, const std::string& target_namespace, IdGenerator& ids,
                                    const Identity& actor, Timestamp now)
{
    std::vector<MemCube> out;
    out.reserve(archive.entries.size());
    for (std::size_t i = 0; i < archive.entries.size(); ++i) {
        const MemCube& src = archive.entries[i].cube;
        if (const auto v = validate(src); !v.empty()) {
            throw Error(ErrorCode::ValidationFailed, "entry " + std::to_string(i) + ": " + v.front());
        }
        MemCube c = src;
        c.cube_id = ids.next(now);
        c.header.namespace_name = target_namespace;
        c.header.state = LifecycleState::of(StateKind::Generated);
        c.header.version_chain.clear();
        if (c.header.compliance.provenance_id.empty()) c.header.compliance.provenance_id = "prov-" + c.cube_id;
        const std::string ref = import_reference(archive.manifest.source_deployment, src.cube_id);
        c.header.compliance.lineage.push_back(ProvenanceEvent{
            "import", "archive from " + archive.manifest.source_deployment, {}, {ref}, actor, now});
        append_version(c, VersionOp::Import, {VersionRef{ref, src.version()}}, actor, now);
        if (c.header.last_access < c.header.created_at) c.header.last_access = c.header.created_at;
        out.push_back(std::move(c));
    }
    return out;
}

// ---- exchange ----

std::string_view to_string(VisibilityKind v) noexcept
{
    for (const auto& [k, n] : kVisibility) {
        if (k == v) return n;
    }
    return "?";
}

std::string_view to_string(DeliveryMode d) noexcept
{
    for (const auto& [k, n] : kDelivery) {
        if (k == d) return n;
    }
    return "?";
}

VisibilityKind parse_visibility_kind(std::string_view s)
{
    for (const auto& [k, n] : kVisibility) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown visibility '" + std::string(s) + "'");
}

DeliveryMode parse_delivery_mode(std::string_view s)
{
    for (const auto& [k, n] : kDelivery) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown delivery mode '" + std::string(s) + "'");
}

bool Visibility::admits(const Identity& actor) const
{
    return kind == VisibilityKind::Public || allow.contains(actor);
}

void License::check() const
{
    if (max_calls && *max_calls == 0) throw Error(ErrorCode::BadArgs, "license.max_calls must be positive");
}

bool Subscription::has_criterion() const
{
    return semantic_query.has_value() || filter != StructuredFilter{};
}

bool Subscription::matches(const Listing& listing, const Embedder& embedder) const
{
    if (!filter.matches(listing.snapshot)) return false;
    if (semantic_query) {
        const Fingerprint q = embedder.embed(*semantic_query);
        if (dot(q, listing.snapshot.header.fingerprint) < min_similarity) return false;
    }
    return listing.visibility.admits(subscriber) || listing.publisher == subscriber;
}

void to_json(Json& j, const Visibility& v)
{
    j = Json{{"kind", std::string(to_string(v.kind))}, {"allow", v.allow}};
}

void from_json(const Json& j, Visibility& v)
{
    v.kind = parse_visibility_kind(j.at("kind").get<std::string>());
    v.allow = j.value("allow", std::set<std::string>{});
}

void to_json(Json& j, const License& l)
{
    j = Json::object();
    j["max_calls"] = l.max_calls ? Json(*l.max_calls) : Json(nullptr);
    j["expires_at"] = l.expires_at ? Json(*l.expires_at) : Json(nullptr);
    j["fee_token"] = l.fee_token ? Json(*l.fee_token) : Json(nullptr);
}

void from_json(const Json& j, License& l)
{
    l = License{};
    if (j.contains("max_calls") && !j.at("max_calls").is_null()) l.max_calls = j.at("max_calls").get<std::uint64_t>();
    if (j.contains("expires_at") && !j.at("expires_at").is_null()) l.expires_at = j.at("expires_at").get<Timestamp>();
    if (j.contains("fee_token") && !j.at("fee_token").is_null()) l.fee_token = j.at("fee_token").get<std::string>();
}

void to_json(Json& j, const Listing& l)
{
    j = Json{{"listing_id", l.listing_id},
             {"snapshot", Json(l.snapshot)},
             {"visibility", Json(l.visibility)},
             {"license", Json(l.license)},
             {"publisher", l.publisher},
             {"published_at", l.published_at}};
}

void from_json(const Json& j, Listing& l)
{
    l.listing_id = j.at("listing_id").get<std::string>();
    l.snapshot = j.at("snapshot").get<MemCube>();
    l.visibility = j.at("visibility").get<Visibility>();
    l.license = j.at("license").get<License>();
    l.publisher = j.at("publisher").get<std::string>();
    l.published_at = j.at("published_at").get<Timestamp>();
}

void to_json(Json& j, const Subscription& s)
{
    j = Json{{"subscription_id", s.subscription_id},
             {"subscriber", s.subscriber},
             {"filter", Json(s.filter)},
             {"semantic_query", s.semantic_query ? Json(*s.semantic_query) : Json(nullptr)},
             {"min_similarity", s.min_similarity},
             {"delivery", std::string(to_string(s.delivery))},
             {"created_at", s.created_at}};
}

void from_json(const Json& j, Subscription& s)
{
    s = Subscription{};
    s.subscription_id = j.value("subscription_id", std::string{});
    s.subscriber = j.value("subscriber", std::string{});
    if (j.contains("filter")) s.filter = j.at("filter").get<StructuredFilter>();
    if (j.contains("semantic_query") && !j.at("semantic_query").is_null()) {
        s.semantic_query = j.at("semantic_query").get<std::string>();
    }
    s.min_similarity = j.value("min_similarity", 0.25);
    s.delivery = parse_delivery_mode(j.value("delivery", std::string("Push")));
    if (j.contains("created_at")) s.created_at = j.at("created_at").get<Timestamp>();
}

void to_json(Json& j, const Delivery& d)
{
    j = Json{{"subscription_id", d.subscription_id},
             {"listing_id", d.listing_id},
             {"subscriber", d.subscriber},
             {"mode", std::string(to_string(d.mode))}};
}

void from_json(const Json& j, Delivery& d)
{
    d.subscription_id = j.at("subscription_id").get<std::string>();
    d.listing_id = j.at("listing_id").get<std::string>();
    d.subscriber = j.at("subscriber").get<std::string>();
    d.mode = parse_delivery_mode(j.at("mode").get<std::string>());
}

Exchange::Exchange(const Embedder& embedder) : embedder_(&embedder) {}

Exchange::Exchange(std::filesystem::path file, const Embedder& embedder) : embedder_(&embedder), file_(std::move(file))
{
    std::uintmax_t keep = 0;
    if (std::ifstream in{*file_, std::ios::binary}) {
        std::string line;
        std::uintmax_t pos = 0;
        while (std::getline(in, line)) {
            if (in.eof()) break;  // unterminated tail line
            try {
                apply(parse_canonical(line));
            } catch (const std::exception&) {
                break;
            }
            pos += line.size() + 1;
            keep = pos;
        }
    }
    if (std::filesystem::exists(*file_) && std::filesystem::file_size(*file_) != keep) {
        std::filesystem::resize_file(*file_, keep);
    }
    out_.open(*file_, std::ios::binary | std::ios::app);
    if (!out_) throw Error(ErrorCode::AdapterUnavailable, "cannot open exchange log " + file_->string());
}

void Exchange::log(const Json& line)
{
    if (!file_) return;
    out_ << canonical_dump(line) << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorCode::AdapterUnavailable, "exchange log write failed");
}

void Exchange::apply(const Json& line)
{
    const std::string t = line.at("t").get<std::string>();
    if (t == "listing") {
        auto l = line.at("listing").get<Listing>();
        listings_.emplace(l.listing_id, std::move(l));
    } else if (t == "subscription") {
        auto s = line.at("subscription").get<Subscription>();
        next_sub_ = std::max(next_sub_, line.value("seq", std::uint64_t{0}) + 1);
        subscriptions_.emplace(s.subscription_id, std::move(s));
    } else if (t == "pull") {
        ++counters_[{line.at("listing_id").get<std::string>(), line.at("actor").get<std::string>()}];
    } else if (t == "delivery") {
        auto d = line.at("delivery").get<Delivery>();
        delivered_.insert({d.listing_id, d.subscription_id});
        if (d.mode == DeliveryMode::Pull) inbox_[d.subscription_id].push_back(d.listing_id);
        deliveries_.push_back(std::move(d));
    } else {
        throw Error(ErrorCode::CorruptLog, "unknown exchange record '" + t + "'");
    }
}

void Exchange::publish(Listing listing)
{
    listing.license.check();
    std::lock_guard lk(mu_);
    if (listings_.contains(listing.listing_id)) {
        throw Error(ErrorCode::BadArgs, "listing " + listing.listing_id + " already exists");
    }
    const Json line{{"t", "listing"}, {"listing", Json(listing)}};
    log(line);
    listings_.emplace(listing.listing_id, std::move(listing));
}

std::string Exchange::subscribe(Subscription s)
{
    if (!s.has_criterion()) throw Error(ErrorCode::BadArgs, "subscription needs a filter or a semantic query");
    s.filter.check();
    std::lock_guard lk(mu_);
    const std::uint64_t seq = next_sub_++;
    s.subscription_id = "sub-" + std::to_string(seq);
    log(Json{{"t", "subscription"}, {"seq", seq}, {"subscription", Json(s)}});
    const std::string id = s.subscription_id;
    subscriptions_.emplace(id, std::move(s));
    return id;
}

std::vector<Delivery> Exchange::notify(const std::string& listing_id)
{
    std::lock_guard lk(mu_);
    const auto it = listings_.find(listing_id);
    if (it == listings_.end()) throw Error(ErrorCode::UnknownListing, listing_id);
    std::vector<Delivery> out;
    for (const auto& [id, sub] : subscriptions_) {
        if (delivered_.contains({listing_id, id})) continue;
        if (!sub.matches(it->second, *embedder_)) continue;
        Delivery d{id, listing_id, sub.subscriber, sub.delivery};
        log(Json{{"t", "delivery"}, {"delivery", Json(d)}});
        delivered_.insert({listing_id, id});
        if (d.mode == DeliveryMode::Pull) inbox_[id].push_back(listing_id);
        deliveries_.push_back(d);
        out.push_back(std::move(d));
    }
    return out;
}

PullReceipt Exchange::pull(const std::string& listing_id, const Identity& actor, Timestamp now,
                           const std::optional<std::string>& fee_token)
{
    std::lock_guard lk(mu_);
    const auto it = listings_.find(listing_id);
    if (it == listings_.end()) throw Error(ErrorCode::UnknownListing, listing_id);
    const Listing& l = it->second;
    if (!l.visibility.admits(actor) && actor != l.publisher) throw Error(ErrorCode::AccessDenied, "NOT_ADMITTED");
    if (l.license.fee_token && fee_token != l.license.fee_token) throw Error(ErrorCode::AccessDenied, "FEE_REQUIRED");
    if (l.license.expires_at && now >= *l.license.expires_at) {
        throw Error(ErrorCode::LicenseExpired, "listing " + listing_id + " expired at " + format_iso8601(*l.license.expires_at));
    }
    auto& count = counters_[{listing_id, actor}];
    if (l.license.max_calls && count >= *l.license.max_calls) {
        throw Error(ErrorCode::LicenseExhausted,
                    "listing " + listing_id + " allows " + std::to_string(*l.license.max_calls) + " calls");
    }
    log(Json{{"t", "pull"}, {"listing_id", listing_id}, {"actor", actor}});
    ++count;
    return PullReceipt{l.snapshot, count, l.license.max_calls};
}

std::optional<Listing> Exchange::listing(const std::string& id) const
{
    std::lock_guard lk(mu_);
    const auto it = listings_.find(id);
    if (it == listings_.end()) return std::nullopt;
    return it->second;
}

std::vector<Listing> Exchange::listings() const
{
    std::lock_guard lk(mu_);
    std::vector<Listing> out;
    for (const auto& [id, l] : listings_) out.push_back(l);
    return out;
}

std::optional<Subscription> Exchange::subscription(const std::string& id) const
{
    std::lock_guard lk(mu_);
    const auto it = subscriptions_.find(id);
    if (it == subscriptions_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Exchange::inbox(const std::string& subscription_id) const
{
    std::lock_guard lk(mu_);
    if (!subscriptions_.contains(subscription_id)) throw Error(ErrorCode::UnknownSubscription, subscription_id);
    const auto it = inbox_.find(subscription_id);
    return it == inbox_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<Delivery> Exchange::deliveries() const
{
    std::lock_guard lk(mu_);
    return deliveries_;
}

std::uint64_t Exchange::calls(const std::string& listing_id, const Identity& actor) const
{
    std::lock_guard lk(mu_);
    const auto it = counters_.find({listing_id, actor});
    return it == counters_.end() ? 0 : it->second;
}

}  // namespace memkernel
