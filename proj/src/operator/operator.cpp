// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/operator/operator.hpp"

#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>

namespace memkernel {

namespace {

[[noreturn]] void malformed(const std::string& msg) { throw Error(ErrorCode::MalformedFilter, msg); }

std::string upper(std::string_view s)
{
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

class ExprParser {
public:
    explicit ExprParser(std::string_view text) { lex(text); }

    TagExpr parse()
    {
        if (tokens_.empty()) return TagExpr::any();
        TagExpr e = parse_or();
        if (pos_ != tokens_.size()) malformed("unexpected '" + tokens_[pos_] + "' in tag expression");
        return e;
    }

private:
    void lex(std::string_view text)
    {
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) tokens_.push_back(std::move(cur));
            cur.clear();
        };
        for (char c : text) {
            if (c == '(' || c == ')') {
                flush();
                tokens_.emplace_back(1, c);
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                flush();
            } else {
                cur.push_back(c);
            }
        }
        flush();
    }

    bool at(const char* kw) const { return pos_ < tokens_.size() && upper(tokens_[pos_]) == kw; }

    TagExpr parse_or()
    {
        std::vector<TagExpr> parts{parse_and()};
        while (at("OR")) {
            ++pos_;
            parts.push_back(parse_and());
        }
        return parts.size() == 1 ? std::move(parts.front()) : TagExpr::any_of(std::move(parts));
    }

    TagExpr parse_and()
    {
        std::vector<TagExpr> parts{parse_unary()};
        while (at("AND")) {
            ++pos_;
            parts.push_back(parse_unary());
        }
        return parts.size() == 1 ? std::move(parts.front()) : TagExpr::all_of(std::move(parts));
    }

    TagExpr parse_unary()
    {
        if (pos_ >= tokens_.size()) malformed("tag expression ends early");
        if (at("NOT")) {
            ++pos_;
            return TagExpr::negate(parse_unary());
        }
        if (tokens_[pos_] == "(") {
            ++pos_;
            TagExpr e = parse_or();
            if (pos_ >= tokens_.size() || tokens_[pos_] != ")") malformed("missing ')' in tag expression");
            ++pos_;
            return e;
        }
        if (tokens_[pos_] == ")" || at("AND") || at("OR")) malformed("unexpected '" + tokens_[pos_] + "'");
        return TagExpr::term(tokens_[pos_++]);
    }

    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

TagExpr TagExpr::parse(std::string_view text) { return ExprParser(text).parse(); }

std::string TagExpr::str() const
{
    switch (kind) {
    case Kind::Any: return "";
    case Kind::Term: return tag;
    case Kind::Not: return "NOT " + children.front().str();
    case Kind::And:
    case Kind::Or: {
        std::string out = "(";
        for (std::size_t i = 0; i < children.size(); ++i) {
            if (i) out += kind == Kind::And ? " AND " : " OR ";
            out += children[i].str();
        }
        return out + ")";
    }
    }
    return "";
}

bool TagExpr::eval(const std::set<std::string>& tags) const
{
    switch (kind) {
    case Kind::Any: return true;
    case Kind::Term: return tags.contains(tag);
    case Kind::Not: return !children.front().eval(tags);
    case Kind::And:
        return std::all_of(children.begin(), children.end(), [&](const TagExpr& c) { return c.eval(tags); });
    case Kind::Or:
        return std::any_of(children.begin(), children.end(), [&](const TagExpr& c) { return c.eval(tags); });
    }
    return false;
}

std::set<std::string> TagExpr::required() const
{
    std::set<std::string> out;
    if (kind == Kind::Term) {
        out.insert(tag);
    } else if (kind == Kind::And) {
        for (const auto& c : children) out.merge(c.required());
    }
    return out;
}

void StructuredFilter::check() const
{
    if (from && to && !(*from < *to)) malformed("time span must satisfy from < to");
    const auto walk = [](const auto& self, const TagExpr& e) -> void {
        if (e.kind == TagExpr::Kind::Term && e.tag.empty()) malformed("empty tag term");
        if (e.kind == TagExpr::Kind::Not && e.children.size() != 1) malformed("NOT takes one operand");
        if ((e.kind == TagExpr::Kind::And || e.kind == TagExpr::Kind::Or) && e.children.empty()) {
            malformed("empty boolean combinator");
        }
        for (const auto& c : e.children) self(self, c);
    };
    walk(walk, tags);
}

bool StructuredFilter::matches(const MemCube& cube) const
{
    const auto& h = cube.header;
    if (from && h.created_at < *from) return false;
    if (to && !(h.created_at < *to)) return false;
    if (!namespaces.empty() && !namespaces.contains(h.namespace_name)) return false;
    if (!layers.empty() && !layers.contains(h.layer)) return false;
    if (!semantic_types.empty() && !semantic_types.contains(h.semantic_type)) return false;
    if (!states.empty() && !states.contains(h.state.kind)) return false;
    return tags.eval(h.tags);
}

void to_json(Json& j, const TagExpr& e)
{
    switch (e.kind) {
    case TagExpr::Kind::Any: j = nullptr; break;
    case TagExpr::Kind::Term: j = e.tag; break;
    case TagExpr::Kind::Not: j = Json{{"not", e.children.front()}}; break;
    case TagExpr::Kind::And: j = Json{{"and", e.children}}; break;
    case TagExpr::Kind::Or: j = Json{{"or", e.children}}; break;
    }
}

void from_json(const Json& j, TagExpr& e)
{
    if (j.is_null()) {
        e = TagExpr::any();
    } else if (j.is_string()) {
        e = TagExpr::parse(j.get<std::string>());
    } else if (j.is_object() && j.size() == 1) {
        const auto& [key, value] = *j.items().begin();
        if (key == "not") {
            e = TagExpr::negate(value.get<TagExpr>());
        } else if (key == "and" || key == "or") {
            if (!value.is_array()) malformed("'" + key + "' takes an array");
            std::vector<TagExpr> parts;
            for (const auto& v : value) parts.push_back(v.get<TagExpr>());
            e = key == "and" ? TagExpr::all_of(std::move(parts)) : TagExpr::any_of(std::move(parts));
        } else if (key == "tag") {
            e = TagExpr::term(value.get<std::string>());
        } else {
            malformed("unknown tag combinator '" + key + "'");
        }
    } else {
        malformed("tag expression must be a string or a one-key object");
    }
}

void to_json(Json& j, const StructuredFilter& f)
{
    j = Json::object();
    if (f.tags.kind != TagExpr::Kind::Any) j["tags"] = f.tags;
    if (f.from) j["from"] = *f.from;
    if (f.to) j["to"] = *f.to;
    if (!f.namespaces.empty()) j["namespaces"] = f.namespaces;
    if (!f.layers.empty()) {
        Json a = Json::array();
        for (auto l : f.layers) a.push_back(std::string(to_string(l)));
        j["layers"] = a;
    }
    if (!f.semantic_types.empty()) j["semantic_types"] = f.semantic_types;
    if (!f.states.empty()) {
        Json a = Json::array();
        for (auto s : f.states) a.push_back(std::string(to_string(s)));
        j["states"] = a;
    }
}

void from_json(const Json& j, StructuredFilter& f)
{
    if (!j.is_object()) malformed("filter must be an object");
    try {
        f = StructuredFilter{};
        if (j.contains("tags")) f.tags = j.at("tags").get<TagExpr>();
        if (j.contains("from")) f.from = j.at("from").get<Timestamp>();
        if (j.contains("to")) f.to = j.at("to").get<Timestamp>();
        if (j.contains("namespaces")) f.namespaces = j.at("namespaces").get<std::set<std::string>>();
        if (j.contains("layers")) {
            for (const auto& l : j.at("layers")) f.layers.insert(parse_layer(l.get<std::string>()));
        }
        if (j.contains("semantic_types")) f.semantic_types = j.at("semantic_types").get<std::set<std::string>>();
        if (j.contains("states")) {
            for (const auto& s : j.at("states")) f.states.insert(parse_state_kind(s.get<std::string>()));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedFilter) throw;
        malformed(e.what());
    } catch (const Json::exception& e) {
        malformed(e.what());
    }
    f.check();
}

std::string_view to_string(MatchedVia m) noexcept
{
    switch (m) {
    case MatchedVia::Structured: return "Structured";
    case MatchedVia::Semantic: return "Semantic";
    case MatchedVia::Hybrid: return "Hybrid";
    }
    return "?";
}

void to_json(Json& j, const RankedHit& h)
{
    j = Json{{"cube_id", h.cube_id},
             {"score", h.score},
             {"matched_via", std::string(to_string(h.matched_via))},
             {"updated_at", h.updated_at}};
}

bool hit_before(const RankedHit& a, const RankedHit& b) noexcept
{
    if (a.score != b.score) return a.score > b.score;
    if (a.updated_at != b.updated_at) return b.updated_at < a.updated_at;
    return a.cube_id < b.cube_id;
}

std::string_view to_string(Goal g) noexcept
{
    switch (g) {
    case Goal::Topic: return "Topic";
    case Goal::Concept: return "Concept";
    case Goal::Fact: return "Fact";
    }
    return "?";
}

void to_json(Json& j, const RetrievalPlan& p)
{
    j = Json::array();
    for (const auto& s : p.steps) {
        j.push_back(Json{{"goal", std::string(to_string(s.goal))},
                         {"filter", s.filter},
                         {"query_text", s.query_text},
                         {"k", s.k},
                         {"seed_tags", s.seed_tags},
                         {"expansion", s.expansion}});
    }
}

namespace {

const std::set<std::string>& task_stopwords()
{
    static const std::set<std::string> words{
        // function words
        "about", "after", "also", "don't", "from", "have", "into", "just", "like", "more", "most", "only", "over",
        "please", "some", "than", "that", "their", "them", "then", "there", "these", "they", "this", "those",
        "under", "very", "what", "when", "where", "which", "while", "with", "within", "without", "would", "your",
        "yours", "mine", "ours", "been", "being", "were", "will", "shall", "should", "could", "does", "each",
        "every", "last", "next", "year", "years", "month", "months", "week", "weeks", "today", "yesterday",
        // task verbs
        "review", "reviews", "find", "show", "list", "summarize", "summarise", "retrieve", "fetch", "check", "analyze",
        "analyse", "explain", "compare", "draft", "write", "update", "archive", "export", "search", "look", "give",
        "tell", "identify", "prepare", "collect", "gather", "recall", "remember", "provide", "help"};
    return words;
}

std::string singular(std::string w)
{
    if (w.size() > 4 && w.ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
    if (w.size() > 4 && w.ends_with("s") && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is")) {
        w.pop_back();
    }
    return w;
}

constexpr std::size_t kTopicK = 5;
constexpr std::size_t kConceptK = 10;
constexpr std::size_t kFactK = 20;

}  // namespace

std::vector<std::string> task_nouns(std::string_view text)
{
    std::vector<std::string> out;
    for (auto& tok : tokenize(text)) {
        if (tok.size() <= 3 || task_stopwords().contains(tok)) continue;
        if (std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
        std::string s = singular(std::move(tok));
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    }
    return out;
}

void MemIndex::unlink(const CubeId& id)
{
    const auto it = cubes_.find(id);
    if (it == cubes_.end()) return;
    for (const auto& t : it->second->header.tags) {
        auto& ids = by_tag_[t];
        ids.erase(id);
        if (ids.empty()) by_tag_.erase(t);
    }
    if (const auto out = out_edges_.find(id); out != out_edges_.end()) {
        for (const auto& ref : out->second) {
            auto& back = in_edges_[ref.target];
            back.erase(id);
            if (back.empty()) in_edges_.erase(ref.target);
        }
        out_edges_.erase(out);
    }
    cubes_.erase(it);
}

void MemIndex::upsert(const MemCube& cube)
{
    auto entry = std::make_shared<const MemCube>(cube);
    std::unique_lock lock(mu_);
    unlink(cube.cube_id);
    for (const auto& t : cube.header.tags) by_tag_[t].insert(cube.cube_id);
    if (const auto* p = cube.plaintext(); p != nullptr && !p->graph_refs.empty()) {
        out_edges_[cube.cube_id] = p->graph_refs;
        for (const auto& ref : p->graph_refs) in_edges_[ref.target].insert(cube.cube_id);
    }
    cubes_[cube.cube_id] = std::move(entry);
}

void MemIndex::remove(const CubeId& id)
{
    std::unique_lock lock(mu_);
    unlink(id);
}

void MemIndex::clear()
{
    std::unique_lock lock(mu_);
    cubes_.clear();
    by_tag_.clear();
    out_edges_.clear();
    in_edges_.clear();
}

bool MemIndex::contains(const CubeId& id) const
{
    std::shared_lock lock(mu_);
    return cubes_.contains(id);
}

IndexStats MemIndex::stats() const
{
    std::shared_lock lock(mu_);
    std::size_t edges = 0;
    for (const auto& [_, v] : out_edges_) edges += v.size();
    return IndexStats{cubes_.size(), by_tag_.size(), edges};
}

std::string MemIndex::dump() const
{
    std::shared_lock lock(mu_);
    Json j;
    Json tags = Json::object();
    for (const auto& [t, ids] : by_tag_) tags[t] = ids;
    Json edges = Json::object();
    for (const auto& [id, refs] : out_edges_) {
        Json a = Json::array();
        for (const auto& r : refs) a.push_back(Json{{"relation", r.relation}, {"target", r.target}});
        edges[id] = a;
    }
    Json back = Json::object();
    for (const auto& [id, src] : in_edges_) back[id] = src;
    Json fps = Json::object();
    for (const auto& [id, c] : cubes_) fps[id] = Json{{"fingerprint", c->header.fingerprint}, {"v", c->version()}};
    j["tags"] = tags;
    j["edges"] = edges;
    j["in_edges"] = back;
    j["cubes"] = fps;
    return canonical_dump(j);
}

std::vector<MemIndex::Entry> MemIndex::candidates(const StructuredFilter* filter, const Identity& actor,
                                                  const CallContext& ctx) const
{
    std::vector<Entry> out;
    const auto admit = [&](const Entry& e) {
        if (filter && !filter->matches(*e)) return;
        if (!decide_access(actor, *e, ctx, AccessOp::Read).allowed) return;
        out.push_back(e);
    };
    const std::set<std::string> required = filter ? filter->tags.required() : std::set<std::string>{};
    if (!required.empty()) {
        // Narrow via the inverted index on the rarest required tag.
        const std::set<CubeId>* best = nullptr;
        for (const auto& t : required) {
            const auto it = by_tag_.find(t);
            if (it == by_tag_.end()) return out;
            if (best == nullptr || it->second.size() < best->size()) best = &it->second;
        }
        for (const auto& id : *best) admit(cubes_.at(id));
    } else {
        for (const auto& [_, e] : cubes_) admit(e);
    }
    return out;
}

std::vector<RankedHit> MemIndex::rank(const std::vector<Entry>& candidates, std::string_view query_text, std::size_t k,
                                      MatchedVia via) const
{
    const Fingerprint q = embedder_->embed(query_text);
    std::vector<RankedHit> hits;
    hits.reserve(candidates.size());
    for (const auto& e : candidates) {
        const auto& fp = e->header.fingerprint;
        const double score = fp.size() == q.size() ? std::clamp(dot(q, fp), -1.0, 1.0) : 0.0;
        hits.push_back(RankedHit{e->cube_id, score, via, e->header.updated_at});
    }
    const std::size_t n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
    hits.resize(n);
    return hits;
}

std::vector<CubeId> MemIndex::query_structured(const StructuredFilter& filter, const Identity& actor,
                                               const CallContext& ctx) const
{
    filter.check();
    std::shared_lock lock(mu_);
    std::vector<CubeId> out;
    for (const auto& e : candidates(&filter, actor, ctx)) out.push_back(e->cube_id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<RankedHit> MemIndex::query_semantic(std::string_view query_text, std::size_t k, const Identity& actor,
                                                const CallContext& ctx) const
{
    if (k == 0) throw Error(ErrorCode::BadArgs, "k must be at least 1");
    std::shared_lock lock(mu_);
    return rank(candidates(nullptr, actor, ctx), query_text, k, MatchedVia::Semantic);
}

std::vector<RankedHit> MemIndex::query_hybrid(const StructuredFilter& filter, std::string_view query_text, std::size_t k,
                                              const Identity& actor, const CallContext& ctx) const
{
    if (k == 0) throw Error(ErrorCode::BadArgs, "k must be at least 1");
    filter.check();
    std::shared_lock lock(mu_);
    return rank(candidates(&filter, actor, ctx), query_text, k, MatchedVia::Hybrid);
}

std::vector<std::string> MemIndex::neighbor_tags(const std::set<std::string>& seeds) const
{
    std::shared_lock lock(mu_);
    std::set<CubeId> seeded;
    for (const auto& t : seeds) {
        if (const auto it = by_tag_.find(t); it != by_tag_.end()) seeded.insert(it->second.begin(), it->second.end());
    }
    std::set<CubeId> hop;
    for (const auto& id : seeded) {
        if (const auto out = out_edges_.find(id); out != out_edges_.end()) {
            for (const auto& r : out->second) hop.insert(r.target);
        }
        if (const auto in = in_edges_.find(id); in != in_edges_.end()) hop.insert(in->second.begin(), in->second.end());
    }
    std::set<std::string> tags;
    for (const auto& id : hop) {
        const auto it = cubes_.find(id);
        if (it == cubes_.end()) continue;
        for (const auto& t : it->second->header.tags) {
            if (!seeds.contains(t)) tags.insert(t);
        }
    }
    return {tags.begin(), tags.end()};
}

RetrievalPlan MemIndex::resolve_path(std::string_view task_text) const
{
    if (tokenize(task_text).empty()) throw Error(ErrorCode::EmptyTask, "task text has no words");
    const auto nouns = task_nouns(task_text);
    RetrievalPlan plan;

    PlanStep topic;
    topic.goal = Goal::Topic;
    topic.k = kTopicK;
    topic.query_text = std::string(task_text);
    topic.filter.semantic_types = {"topic"};
    if (!nouns.empty()) {
        topic.seed_tags = {nouns.front()};
        topic.filter.tags = TagExpr::term(nouns.front());
    }

    PlanStep concept_step;
    concept_step.goal = Goal::Concept;
    concept_step.k = kConceptK;
    concept_step.query_text = std::string(task_text);
    if (nouns.size() > 1) {
        std::string joined;
        for (std::size_t i = 1; i < nouns.size(); ++i) {
            if (i > 1) joined += "-";
            joined += nouns[i];
        }
        concept_step.seed_tags.push_back(joined);
        for (std::size_t i = 1; i < nouns.size(); ++i) concept_step.seed_tags.push_back(nouns[i]);
    }
    if (!concept_step.seed_tags.empty()) {
        concept_step.expansion = neighbor_tags({concept_step.seed_tags.begin(), concept_step.seed_tags.end()});
        std::vector<TagExpr> terms;
        for (const auto& t : concept_step.seed_tags) terms.push_back(TagExpr::term(t));
        for (const auto& t : concept_step.expansion) terms.push_back(TagExpr::term(t));
        concept_step.filter.tags = terms.size() == 1 ? terms.front() : TagExpr::any_of(std::move(terms));
    }

    PlanStep fact;
    fact.goal = Goal::Fact;
    fact.k = kFactK;
    fact.query_text = std::string(task_text);

    plan.steps = {std::move(topic), std::move(concept_step), std::move(fact)};
    return plan;
}

std::vector<std::vector<RankedHit>> MemIndex::execute(const RetrievalPlan& plan, const Identity& actor,
                                                      const CallContext& ctx) const
{
    std::vector<std::vector<RankedHit>> out;
    for (const auto& step : plan.steps) {
        if (step.goal == Goal::Fact) {
            out.push_back(query_semantic(step.query_text, step.k, actor, ctx));
        } else if (step.seed_tags.empty()) {
            out.emplace_back();  // nothing to anchor the step on
        } else {
            out.push_back(query_hybrid(step.filter, step.query_text, step.k, actor, ctx));
        }
    }
    return out;
}

void HotCache::touch(const CubeId& id, const Fingerprint& fingerprint, Timestamp now)
{
    std::lock_guard lock(mu_);
    touches_[id].push_back(now);
    fingerprints_[id] = fingerprint;
}

void HotCache::note_query(const Fingerprint& query, Timestamp /*now*/)
{
    std::lock_guard lock(mu_);
    queries_.push_back(query);
    while (queries_.size() > config_.centroid_queries) queries_.pop_front();
}

CacheChanges HotCache::evaluate(Timestamp now)
{
    std::lock_guard lock(mu_);
    const auto window_start = Timestamp{now.micros - static_cast<std::int64_t>(config_.window_seconds * kMicrosPerSecond)};
    const auto in_window = [&](const CubeId& id) -> std::size_t {
        const auto it = touches_.find(id);
        if (it == touches_.end()) return 0;
        return static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(), [&](Timestamp t) {
            return window_start < t && !(now < t);
        }));
    };

    std::optional<Fingerprint> centroid;
    if (!queries_.empty()) {
        Fingerprint c(queries_.front().size(), 0.0);
        for (const auto& q : queries_) {
            for (std::size_t i = 0; i < c.size() && i < q.size(); ++i) c[i] += q[i];
        }
        const double n = l2_norm(c);
        if (n > 0) {
            for (double& x : c) x /= n;
            centroid = std::move(c);
        }
    }

    CacheChanges changes;
    for (const auto& id : std::set<CubeId>(hot_)) {
        const double rate = static_cast<double>(in_window(id)) / config_.window_seconds;
        bool drifted = false;
        if (centroid) {
            const auto& fp = fingerprints_[id];
            drifted = fp.size() == centroid->size() && dot(fp, *centroid) < config_.drift_delta;
        }
        if (rate < config_.c_cold || drifted) {
            hot_.erase(id);
            changes.invalidated.push_back(id);
        }
    }
    for (const auto& [id, _] : touches_) {
        if (hot_.contains(id)) continue;
        if (std::find(changes.invalidated.begin(), changes.invalidated.end(), id) != changes.invalidated.end()) continue;
        if (in_window(id) >= config_.c_hot) {
            hot_.insert(id);
            changes.promoted.push_back(id);
        }
    }
    return changes;
}

bool HotCache::is_hot(const CubeId& id) const
{
    std::lock_guard lock(mu_);
    return hot_.contains(id);
}

std::set<CubeId> HotCache::hot() const
{
    std::lock_guard lock(mu_);
    return hot_;
}

}  // namespace memkernel
