#pragma once

// Log parsing, windowing and golden-signal labelling.

#include "mmrca/simgen.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmrca::logs {

inline constexpr std::string_view kWildcard = "<*>";
// Template id used by the placeholder record of an entity with no events in a window.
inline constexpr int kEmptyTemplate = -1;

struct LogTemplate {
    int template_id = 0;
    std::string pattern;

    bool operator==(const LogTemplate&) const = default;
};

struct LogEvent {
    std::int64_t timestamp = 0;
    int entity = 0;
    int template_id = 0;

    bool operator==(const LogEvent&) const = default;
};

struct ParsedLogs {
    std::vector<LogTemplate> vocabulary;
    std::vector<LogEvent> events;
};

struct LogSequenceWindow {
    int entity = 0;
    int window_index = 0;
    std::vector<int> templates;    // unique, ordered by first appearance
    std::vector<int> frequencies;  // aligned with templates
    double label = 0.0;

    bool is_empty_window() const { return templates.size() == 1 && templates[0] == kEmptyTemplate; }
};

// Masks UUIDs, IPs, hex literals and numbers; any remaining token with a digit
// collapses to the wildcard. Idempotent.
std::string mask_message(std::string_view message);

// A raw record as read from disk; absent fields are std::nullopt.
struct RawRecord {
    std::optional<std::int64_t> timestamp;
    std::optional<int> entity;
    std::optional<std::string> message;
};

// Identical masked messages share a template id, assigned in first-seen order.
// Throws std::invalid_argument naming the first record with a missing field.
ParsedLogs parse_templates(const std::vector<RawRecord>& raw);
ParsedLogs parse_templates(const std::vector<simgen::LogRecord>& raw);

// One record per (entity, window) over n_windows windows; windows without events
// get the EMPTY placeholder. If n_windows is absent it is inferred from the
// largest timestamp. Throws on template ids missing from the vocabulary.
std::vector<LogSequenceWindow> window_sequences(const std::vector<LogEvent>& events,
                                                const std::vector<LogTemplate>& vocabulary, int window_size,
                                                int n_entities, std::optional<int> n_windows = std::nullopt);

const std::vector<std::string>& default_golden_signals();

// Frequency-weighted share of templates containing any golden signal
// (case-insensitive). The EMPTY placeholder scores 0.
double label_anomaly(const LogSequenceWindow& window, const std::vector<LogTemplate>& vocabulary,
                     const std::vector<std::string>& golden_signals);

// Labels every window in place.
void label_all(std::vector<LogSequenceWindow>& windows, const std::vector<LogTemplate>& vocabulary,
               const std::vector<std::string>& golden_signals);

}  // namespace mmrca::logs
