#include "mmrca/log_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <stdexcept>
#include <unordered_map>

namespace mmrca::logs {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct Masker {
    // Order matters: the wider shapes must win before bare numbers chew them up.
    std::vector<std::regex> patterns{
        std::regex(R"([0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12})"),
        std::regex(R"(\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}(:\d+)?)"),
        std::regex(R"(0[xX][0-9a-fA-F]+)"),
        std::regex(R"(\d+\.\d+)"),
        std::regex(R"(\b[0-9a-fA-F]*\d[0-9a-fA-F]*\b)"),
        std::regex(R"(\d+)"),
    };
};

const Masker& masker() {
    static const Masker m;
    return m;
}

}  // namespace

std::string mask_message(std::string_view message) {
    std::string s(message);
    for (const auto& re : masker().patterns) s = std::regex_replace(s, re, std::string(kWildcard));
    // Residual digits (e.g. inside identifiers) mask the whole token.
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[i]))) {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t j = i;
        bool digit = false;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) {
            digit = digit || std::isdigit(static_cast<unsigned char>(s[j]));
            ++j;
        }
        if (digit) {
            out.append(kWildcard);
        } else {
            out.append(s, i, j - i);
        }
        i = j;
    }
    return out;
}

ParsedLogs parse_templates(const std::vector<RawRecord>& raw) {
    ParsedLogs parsed;
    std::unordered_map<std::string, int> ids;
    parsed.events.reserve(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const auto& r = raw[k];
        if (!r.timestamp || !r.entity || !r.message) {
            std::string missing = !r.timestamp ? "timestamp" : (!r.entity ? "entity" : "message");
            throw std::invalid_argument("log record " + std::to_string(k) + " is missing field '" + missing + "'");
        }
        auto pattern = mask_message(*r.message);
        auto [it, inserted] = ids.try_emplace(pattern, static_cast<int>(parsed.vocabulary.size()));
        if (inserted) parsed.vocabulary.push_back({it->second, pattern});
        parsed.events.push_back({*r.timestamp, *r.entity, it->second});
    }
    return parsed;
}

ParsedLogs parse_templates(const std::vector<simgen::LogRecord>& raw) {
    std::vector<RawRecord> records;
    records.reserve(raw.size());
    for (const auto& r : raw) records.push_back({r.timestamp, r.entity, r.message});
    return parse_templates(records);
}

std::vector<LogSequenceWindow> window_sequences(const std::vector<LogEvent>& events,
                                                const std::vector<LogTemplate>& vocabulary, int window_size,
                                                int n_entities, std::optional<int> n_windows) {
    if (window_size < 1) throw std::invalid_argument("window_size must be at least 1");
    if (n_entities < 1) throw std::invalid_argument("n_entities must be positive");

    std::vector<bool> known;
    for (const auto& t : vocabulary) {
        if (t.template_id < 0) throw std::invalid_argument("negative template id in vocabulary");
        if (static_cast<std::size_t>(t.template_id) >= known.size()) known.resize(t.template_id + 1, false);
        known[t.template_id] = true;
    }

    std::int64_t max_ts = -1;
    for (const auto& e : events) {
        if (e.template_id < 0 || static_cast<std::size_t>(e.template_id) >= known.size() || !known[e.template_id]) {
            throw std::invalid_argument("template id " + std::to_string(e.template_id) + " is not in the vocabulary");
        }
        if (e.entity < 0 || e.entity >= n_entities) {
            throw std::invalid_argument("event entity " + std::to_string(e.entity) + " out of range");
        }
        if (e.timestamp < 0) throw std::invalid_argument("negative event timestamp");
        max_ts = std::max(max_ts, e.timestamp);
    }
    const int windows = n_windows ? *n_windows : static_cast<int>(max_ts / window_size + 1);
    if (windows < 0) throw std::invalid_argument("n_windows must be non-negative");

    // Stable sort keeps input order among equal timestamps.
    std::vector<LogEvent> sorted = events;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const LogEvent& a, const LogEvent& b) { return a.timestamp < b.timestamp; });

    std::vector<LogSequenceWindow> out(static_cast<std::size_t>(n_entities) * windows);
    for (int e = 0; e < n_entities; ++e) {
        for (int w = 0; w < windows; ++w) {
            auto& rec = out[static_cast<std::size_t>(e) * windows + w];
            rec.entity = e;
            rec.window_index = w;
        }
    }
    for (const auto& ev : sorted) {
        const auto w = static_cast<int>(ev.timestamp / window_size);
        if (w >= windows) continue;
        auto& rec = out[static_cast<std::size_t>(ev.entity) * windows + w];
        auto it = std::find(rec.templates.begin(), rec.templates.end(), ev.template_id);
        if (it == rec.templates.end()) {
            rec.templates.push_back(ev.template_id);
            rec.frequencies.push_back(1);
        } else {
            ++rec.frequencies[static_cast<std::size_t>(it - rec.templates.begin())];
        }
    }
    for (auto& rec : out) {
        if (rec.templates.empty()) {
            rec.templates = {kEmptyTemplate};
            rec.frequencies = {1};
            rec.label = 0.0;
        }
    }
    return out;
}

namespace {

// Keywords are matched against masked templates, so numeric keywords
// ("502 Bad Gateway") are masked the same way.
std::vector<std::string> keyword_forms(const std::vector<std::string>& golden_signals) {
    std::vector<std::string> keys;
    keys.reserve(golden_signals.size());
    for (const auto& g : golden_signals) keys.push_back(lower(mask_message(g)));
    return keys;
}

}  // namespace

const std::vector<std::string>& default_golden_signals() {
    static const std::vector<std::string> k = {
        "error",          "exception",          "critical",           "fatal",
        "timeout",        "connection refused", "no space left",      "out of memory",
        "terminated unexpectedly", "backtrace",  "stack trace",       "service unavailable",
        "502 bad gateway", "503 service unavailable", "504 gateway timeout", "unable to connect to",
        "rate limit exceeded", "request limit exceeded", "cloud system down", "cloud service not responding",
        "failure",        "corrupted data",     "data loss",          "file not found",
        "high cpu utilization", "cpu spike",    "cpu saturation",     "excessive cpu usage",
        "failed",         "shutdown",           "permission denied",  "debug",
    };
    return k;
}

double label_anomaly(const LogSequenceWindow& window, const std::vector<LogTemplate>& vocabulary,
                     const std::vector<std::string>& golden_signals) {
    if (window.is_empty_window()) return 0.0;
    const auto keys = keyword_forms(golden_signals);

    long total = 0;
    long flagged = 0;
    for (std::size_t k = 0; k < window.templates.size(); ++k) {
        const int id = window.templates[k];
        const int f = window.frequencies[k];
        total += f;
        auto it = std::find_if(vocabulary.begin(), vocabulary.end(), [id](const LogTemplate& t) { return t.template_id == id; });
        if (it == vocabulary.end()) continue;
        const auto pat = lower(it->pattern);
        const bool hit = std::any_of(keys.begin(), keys.end(),
                                     [&pat](const std::string& kw) { return pat.find(kw) != std::string::npos; });
        if (hit) flagged += f;
    }
    return total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
}

void label_all(std::vector<LogSequenceWindow>& windows, const std::vector<LogTemplate>& vocabulary,
               const std::vector<std::string>& golden_signals) {
    // Keyword hits per template, resolved once.
    const auto keys = keyword_forms(golden_signals);
    std::map<int, bool> abnormal;
    for (const auto& t : vocabulary) {
        const auto pat = lower(t.pattern);
        abnormal[t.template_id] =
            std::any_of(keys.begin(), keys.end(), [&pat](const std::string& kw) { return pat.find(kw) != std::string::npos; });
    }
    for (auto& w : windows) {
        if (w.is_empty_window()) {
            w.label = 0.0;
            continue;
        }
        long total = 0;
        long flagged = 0;
        for (std::size_t k = 0; k < w.templates.size(); ++k) {
            total += w.frequencies[k];
            auto it = abnormal.find(w.templates[k]);
            if (it != abnormal.end() && it->second) flagged += w.frequencies[k];
        }
        w.label = total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
    }
}

}  // namespace mmrca::logs
