#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace examforge::store {

enum class EventKind { SessionStarted, SubmissionMade, HintRequested, StageSkipped, SessionFinished };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view text);

struct EventRecord {
    std::uint64_t seq = 0;
    std::string timestamp;  // UTC, 2026-01-31T12:00:00.000Z
    std::string session_id;
    EventKind kind = EventKind::SessionStarted;
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

/// One line of the log, newline included.
std::string encode_event(const EventRecord& event);

/// Throws std::invalid_argument on anything that is not a well-formed record.
EventRecord decode_event(std::string_view line);

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using WallClock = std::function<std::chrono::system_clock::time_point()>;

std::string format_timestamp(std::chrono::system_clock::time_point t);

struct LogOptions {
    WallClock clock;
    bool sync = true;  // fsync after every append
};

/// Append-only event log, one `events-YYYY-MM-DD.jsonl` file per UTC day.
/// Sequence numbers continue across files and restarts.
class EventLog {
public:
    explicit EventLog(std::filesystem::path dir, LogOptions options = {});
    ~EventLog();

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Written and flushed before returning. Throws StorageError.
    std::uint64_t append(const std::string& session_id, EventKind kind, nlohmann::ordered_json payload);

    std::uint64_t last_seq() const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    void open_day(const std::string& day);

    std::filesystem::path dir_;
    LogOptions options_;
    mutable std::mutex mutex_;
    std::uint64_t seq_ = 0;
    std::string day_;
    int fd_ = -1;
};

struct Corruption {
    std::string file;
    std::size_t line = 0;
    std::uint64_t after_seq = 0;  // last good sequence number before it
    std::string message;
};

struct LogContents {
    std::vector<EventRecord> events;
    std::vector<Corruption> corruptions;
};

/// Log files in day order.
std::vector<std::filesystem::path> log_files(const std::filesystem::path& dir);

/// Reads every log file. Tolerant mode skips bad lines and reports them;
/// strict mode throws StorageError at the first one. A missing directory
/// reads as empty.
LogContents read_log(const std::filesystem::path& dir, bool tolerant = true);

}  // namespace examforge::store
