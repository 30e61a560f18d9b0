// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/interface/reader.hpp"

#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

namespace memkernel {

namespace {

constexpr std::array<std::pair<Intent, std::string_view>, 5> kIntentNames{{
    {Intent::Retrieve, "Retrieve"},
    {Intent::Summarize, "Summarize"},
    {Intent::Update, "Update"},
    {Intent::Archive, "Archive"},
    {Intent::Export, "Export"},
}};

enum class Unit { Day, Week, Month, Year };

Unit parse_unit(std::string_view s)
{
    if (s.starts_with("day")) return Unit::Day;
    if (s.starts_with("week")) return Unit::Week;
    if (s.starts_with("month")) return Unit::Month;
    return Unit::Year;
}

CivilDate add_months(CivilDate d, std::int64_t months)
{
    std::int64_t m = static_cast<std::int64_t>(d.month) - 1 + months;
    std::int64_t y = d.year + (m >= 0 ? m / 12 : (m - 11) / 12);
    m = ((m % 12) + 12) % 12;
    CivilDate out{y, static_cast<unsigned>(m + 1), d.day};
    // Clamp to the last day of the month.
    while (out.day > 28 && civil_from_days(days_from_civil(out)).month != out.month) --out.day;
    return out;
}

Timestamp shift(Timestamp t, Unit u, std::int64_t n)
{
    switch (u) {
    case Unit::Day: return t.plus_seconds(n * 86400);
    case Unit::Week: return t.plus_seconds(n * 7 * 86400);
    case Unit::Month:
    case Unit::Year: {
        const std::int64_t months = u == Unit::Month ? n : 12 * n;
        const CivilDate d = date_of(t);
        const std::int64_t within_day = t.micros - start_of_day(d).micros;
        return Timestamp{start_of_day(add_months(d, months)).micros + within_day};
    }
    }
    return t;
}

// Calendar unit containing `now`, offset by `n` units.
TimeWindow calendar_unit(Timestamp now, Unit u, std::int64_t n)
{
    const CivilDate today = date_of(now);
    CivilDate start = today;
    switch (u) {
    case Unit::Day: break;
    case Unit::Week: {
        // 1970-01-01 was a Thursday; Monday-based weekday in [0, 6].
        const std::int64_t days = days_from_civil(today);
        const std::int64_t weekday = ((days + 3) % 7 + 7) % 7;
        start = civil_from_days(days - weekday);
        break;
    }
    case Unit::Month: start.day = 1; break;
    case Unit::Year:
        start.day = 1;
        start.month = 1;
        break;
    }
    const Timestamp from = shift(start_of_day(start), u, n);
    return TimeWindow{from, shift(from, u, 1)};
}

Timestamp parse_date(const std::string& s) { return parse_iso8601(s); }

const std::set<std::string>& stopwords()
{
    static const std::set<std::string> words{
        "a",     "an",    "the",   "my",     "our",   "your",   "his",   "her",    "their", "its",   "me",
        "i",     "we",    "you",   "they",   "it",    "please", "and",   "or",     "of",    "for",   "from",
        "to",    "in",    "on",    "at",     "by",    "with",   "about", "what",   "did",   "do",    "does",
        "is",    "are",   "was",   "were",   "be",    "been",   "can",   "could",  "would", "should", "will",
        "all",   "any",   "some",  "that",   "this",  "these",  "those", "there",  "here",  "which", "who",
        "whom",  "how",   "when",  "where",  "why",   "into",   "between", "until", "through", "than", "then",
        "again", "also",  "just",  "only",   "us",    "them",   "him",   "she",    "he",    "mine",  "yours",
        "ours",  "have",  "has",   "had",    "get",   "give",   "tell",  "let",    "need",  "want",  "like",
        "last",  "past",  "day",   "days",   "week",  "weeks",  "month", "months", "year",  "years", "before",
        "today", "yesterday", "ago", "now",  "recent", "recently",
    };
    return words;
}

struct IntentWord {
    std::string_view word;
    Intent intent;
};

constexpr std::array<IntentWord, 19> kIntentWords{{
    {"summarize", Intent::Summarize}, {"summarise", Intent::Summarize}, {"summary", Intent::Summarize},
    {"recap", Intent::Summarize},     {"retrieve", Intent::Retrieve},   {"show", Intent::Retrieve},
    {"find", Intent::Retrieve},       {"fetch", Intent::Retrieve},      {"list", Intent::Retrieve},
    {"recall", Intent::Retrieve},     {"archive", Intent::Archive},     {"export", Intent::Export},
    {"update", Intent::Update},       {"append", Intent::Update},       {"amend", Intent::Update},
    {"edit", Intent::Update},         {"change", Intent::Update},       {"overwrite", Intent::Update},
    {"merge", Intent::Update},
}};

std::optional<MemoryKind> kind_word(const std::string& w)
{
    if (w == "kv" || w == "activation" || w == "activations") return MemoryKind::Activation;
    if (w == "parameter" || w == "parameters" || w == "adapter" || w == "adapters" || w == "lora") {
        return MemoryKind::Parameter;
    }
    if (w == "plaintext") return MemoryKind::Plaintext;
    return std::nullopt;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

// Replaces the matched span with spaces so later passes do not see it.
void blank(std::string& text, std::size_t pos, std::size_t len) { text.replace(pos, len, std::string(len, ' ')); }

struct TimeParse {
    std::optional<TimeWindow> window;
    std::optional<Unit> shift_back;  // "the <unit> before"
};

const Clock& need_clock(const Clock* clock, const std::string& phrase)
{
    if (clock == nullptr) throw Error(ErrorCode::UnresolvableTime, "'" + phrase + "' needs a clock");
    return *clock;
}

TimeParse parse_time(std::string& text, const Clock* clock)
{
    static const std::regex range(
        R"((?:from|between)\s+(\d{4}-\d{2}-\d{2})\s+(?:to|and|until|through)\s+(\d{4}-\d{2}-\d{2}))");
    static const std::regex dots(R"((\d{4}-\d{2}-\d{2})\s*\.\.\s*(\d{4}-\d{2}-\d{2}))");
    static const std::regex single(R"((?:on\s+|since\s+)?\b(\d{4}-\d{2}-\d{2})\b)");
    static const std::regex before(R"(\b(?:the\s+)?(day|week|month|year)\s+before\b)");
    static const std::regex past(R"(\b(?:past|last)\s+(\d+)\s+(days?|weeks?)\b)");
    static const std::regex relative(R"(\b(last|this|previous)\s+(week|month|year)\b)");
    static const std::regex simple(R"(\b(today|yesterday)\b)");

    TimeParse out;
    std::smatch m;
    auto take = [&](const std::regex& re) { return std::regex_search(text, m, re); };
    auto consume = [&] { blank(text, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0))); };

    if (take(range) || take(dots)) {
        const Timestamp from = parse_date(m[1].str());
        const Timestamp to = parse_date(m[2].str()).plus_seconds(86400);
        if (to <= from) throw Error(ErrorCode::BadArgs, "time range ends before it starts: " + m.str(0));
        out.window = TimeWindow{from, to};
        consume();
        return out;
    }
    if (take(single)) {
        const Timestamp day = parse_date(m[1].str());
        out.window = TimeWindow{day, day.plus_seconds(86400)};
        consume();
        return out;
    }
    if (take(before)) {
        out.shift_back = parse_unit(m[1].str());
        consume();
        return out;
    }
    if (take(past)) {
        const std::int64_t n = std::stoll(m[1].str());
        const Unit u = parse_unit(m[2].str());
        const Timestamp now = need_clock(clock, m.str(0)).now();
        const Timestamp tomorrow = start_of_day(date_of(now)).plus_seconds(86400);
        const std::int64_t days = (u == Unit::Day ? n : 7 * n);
        out.window = TimeWindow{tomorrow.plus_seconds(-days * 86400), tomorrow};
        consume();
        return out;
    }
    if (take(relative)) {
        const Timestamp now = need_clock(clock, m.str(0)).now();
        out.window = calendar_unit(now, parse_unit(m[2].str()), m[1].str() == "this" ? 0 : -1);
        consume();
        return out;
    }
    if (take(simple)) {
        const Timestamp now = need_clock(clock, m.str(0)).now();
        out.window = calendar_unit(now, Unit::Day, m[1].str() == "today" ? 0 : -1);
        consume();
        return out;
    }
    return out;
}

template <typename T, typename Get>
std::optional<T> most_recent(std::span<const MemoryCall> dialogue, Get get)
{
    for (auto it = dialogue.rbegin(); it != dialogue.rend(); ++it) {
        if (auto v = get(*it)) return v;
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Intent i) noexcept
{
    for (const auto& [k, n] : kIntentNames) {
        if (k == i) return n;
    }
    return "Retrieve";
}

Intent parse_intent(std::string_view s)
{
    for (const auto& [k, n] : kIntentNames) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown intent '" + std::string(s) + "'");
}

void to_json(Json& j, const TimeWindow& w) { j = Json{{"from", w.from}, {"to", w.to}}; }

void from_json(const Json& j, TimeWindow& w)
{
    w.from = j.at("from").get<Timestamp>();
    w.to = j.at("to").get<Timestamp>();
    if (w.to < w.from) throw Error(ErrorCode::BadArgs, "time window is not well-ordered");
}

void to_json(Json& j, const MemoryCall& c)
{
    Json kinds = Json::array();
    for (auto k : c.memory_types) kinds.push_back(std::string(to_string(k)));
    j = Json{{"caller_id", c.caller_id},
             {"context_scope", c.context_scope},
             {"memory_types", kinds},
             {"intent", std::string(to_string(c.intent))},
             {"time_window", c.time_window ? Json(*c.time_window) : Json(nullptr)},
             {"topic_tags", c.topic_tags},
             {"anchors", c.anchors},
             {"output_target", c.output_target ? Json(*c.output_target) : Json(nullptr)}};
}

void from_json(const Json& j, MemoryCall& c)
{
    c = MemoryCall{};
    c.caller_id = j.value("caller_id", std::string{});
    c.context_scope = j.value("context_scope", std::string{});
    if (j.contains("memory_types")) {
        for (const auto& k : j.at("memory_types")) c.memory_types.insert(parse_memory_kind(k.get<std::string>()));
    }
    c.intent = parse_intent(j.at("intent").get<std::string>());
    if (j.contains("time_window") && !j.at("time_window").is_null()) c.time_window = j.at("time_window").get<TimeWindow>();
    if (j.contains("topic_tags")) c.topic_tags = j.at("topic_tags").get<std::set<std::string>>();
    if (j.contains("anchors")) c.anchors = j.at("anchors").get<std::set<std::string>>();
    if (j.contains("output_target") && !j.at("output_target").is_null()) {
        c.output_target = j.at("output_target").get<std::string>();
    }
}

MemoryCall parse(const ReaderInput& input)
{
    const bool blank_prompt = std::all_of(input.prompt.begin(), input.prompt.end(),
                                          [](char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; });
    if (blank_prompt) throw Error(ErrorCode::EmptyPrompt, "prompt is empty");

    MemoryCall call;
    call.caller_id = input.caller_id;
    call.context_scope = input.context_scope;

    std::string raw(input.prompt);

    // Anchors: quoted phrases, then cube ids.
    static const std::regex quoted("\"([^\"]+)\"|\xE2\x80\x9C([^\xE2]+)\xE2\x80\x9D");
    for (std::smatch m; std::regex_search(raw, m, quoted);) {
        call.anchors.insert(m[1].matched ? m[1].str() : m[2].str());
        blank(raw, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
    }
    static const std::regex cube_id(R"(\b[0-9A-HJKMNP-TV-Z]{26}\b)");
    for (std::smatch m; std::regex_search(raw, m, cube_id);) {
        call.anchors.insert(m.str(0));
        blank(raw, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
    }

    std::string text = lower(raw);
    TimeParse time = parse_time(text, input.clock);
    std::optional<Intent> intent;
    if (const auto at = text.find("what did"); at != std::string::npos) {
        intent = Intent::Retrieve;
        blank(text, at, 8);
    }
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text + " ") {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u) != 0 || ch == '-' || u >= 0x80) {
            cur.push_back(ch);
        } else if (!cur.empty()) {
            while (!cur.empty() && cur.front() == '-') cur.erase(cur.begin());
            while (!cur.empty() && cur.back() == '-') cur.pop_back();
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        }
    }

    std::vector<std::string> tags;
    for (const auto& w : words) {
        const auto iw = std::find_if(kIntentWords.begin(), kIntentWords.end(), [&](const IntentWord& x) { return x.word == w; });
        if (iw != kIntentWords.end()) {
            if (!intent) intent = iw->intent;
            continue;
        }
        if (auto k = kind_word(w)) {
            call.memory_types.insert(*k);
            continue;
        }
        if (stopwords().contains(w) || w.size() < 3) continue;
        if (std::all_of(w.begin(), w.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0 || ch == '-'; })) {
            continue;
        }
        tags.push_back(w);
    }
    call.topic_tags.insert(tags.begin(), tags.end());

    const auto& dialogue = input.dialogue;
    if (time.window) {
        call.time_window = time.window;
    } else if (time.shift_back) {
        auto base = most_recent<TimeWindow>(dialogue, [](const MemoryCall& c) { return c.time_window; });
        if (base) {
            call.time_window = TimeWindow{shift(base->from, *time.shift_back, -1), shift(base->to, *time.shift_back, -1)};
        } else {
            const Timestamp now = need_clock(input.clock, "before").now();
            call.time_window = calendar_unit(now, *time.shift_back, -1);
        }
    } else {
        call.time_window = most_recent<TimeWindow>(dialogue, [](const MemoryCall& c) { return c.time_window; });
    }

    if (intent) {
        call.intent = *intent;
    } else if (!dialogue.empty()) {
        call.intent = dialogue.back().intent;
    }

    if (call.intent == Intent::Summarize && intent) {
        call.output_target = "summary";
    } else if (call.intent == Intent::Export && intent) {
        call.output_target = "archive";
    } else {
        call.output_target = most_recent<std::string>(dialogue, [](const MemoryCall& c) { return c.output_target; });
    }

    if (call.topic_tags.empty()) {
        if (auto t = most_recent<std::set<std::string>>(dialogue, [](const MemoryCall& c) {
                return c.topic_tags.empty() ? std::nullopt : std::optional(c.topic_tags);
            })) {
            call.topic_tags = *t;
        }
    }
    if (call.memory_types.empty()) {
        if (auto t = most_recent<std::set<MemoryKind>>(dialogue, [](const MemoryCall& c) {
                return c.memory_types.empty() ? std::nullopt : std::optional(c.memory_types);
            })) {
            call.memory_types = *t;
        }
    }
    if (call.anchors.empty()) {
        if (auto t = most_recent<std::set<std::string>>(dialogue, [](const MemoryCall& c) {
                return c.anchors.empty() ? std::nullopt : std::optional(c.anchors);
            })) {
            call.anchors = *t;
        }
    }
    return call;
}

}  // namespace memkernel
