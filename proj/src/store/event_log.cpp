#include "examforge/store/event_log.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>

#include <fcntl.h>
#include <unistd.h>

namespace examforge::store {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPrefix = "events-";
constexpr std::string_view kSuffix = ".jsonl";

std::string errno_text() { return std::strerror(errno); }

bool write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

bool is_log_name(const std::string& name) {
    return name.size() == kPrefix.size() + 10 + kSuffix.size() && name.rfind(kPrefix, 0) == 0 &&
           name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0;
}

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::SessionStarted: return "sessionStarted";
        case EventKind::SubmissionMade: return "submissionMade";
        case EventKind::HintRequested: return "hintRequested";
        case EventKind::StageSkipped: return "stageSkipped";
        case EventKind::SessionFinished: return "sessionFinished";
    }
    return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view text) {
    for (auto k : {EventKind::SessionStarted, EventKind::SubmissionMade, EventKind::HintRequested,
                   EventKind::StageSkipped, EventKind::SessionFinished}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
    using namespace std::chrono;
    const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

std::string encode_event(const EventRecord& event) {
    nlohmann::ordered_json j;
    j["seq"] = event.seq;
    j["ts"] = event.timestamp;
    j["session"] = event.session_id;
    j["kind"] = to_string(event.kind);
    j["payload"] = event.payload;
    return j.dump() + "\n";
}

EventRecord decode_event(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("record is not an object");
    auto need = [&](const char* key) -> const nlohmann::ordered_json& {
        auto it = j.find(key);
        if (it == j.end()) throw std::invalid_argument(std::string("missing '") + key + "'");
        return *it;
    };
    EventRecord e;
    const auto& seq = need("seq");
    if (!seq.is_number_unsigned() || seq.get<std::uint64_t>() == 0) throw std::invalid_argument("bad seq");
    e.seq = seq.get<std::uint64_t>();
    const auto& ts = need("ts");
    const auto& session = need("session");
    const auto& kind = need("kind");
    if (!ts.is_string() || !session.is_string() || !kind.is_string()) {
        throw std::invalid_argument("ts, session and kind must be strings");
    }
    e.timestamp = ts.get<std::string>();
    e.session_id = session.get<std::string>();
    auto k = event_kind_from_string(kind.get<std::string>());
    if (!k) throw std::invalid_argument("unknown kind '" + kind.get<std::string>() + "'");
    e.kind = *k;
    e.payload = need("payload");
    if (!e.payload.is_object()) throw std::invalid_argument("payload must be an object");
    if (j.size() != 5) throw std::invalid_argument("unexpected members");
    return e;
}

std::vector<fs::path> log_files(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (is_log_name(entry.path().filename().string())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

LogContents read_log(const fs::path& dir, bool tolerant) {
    LogContents out;
    std::uint64_t last = 0;
    for (const auto& file : log_files(dir)) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw StorageError("cannot read " + file.string());
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (line.empty()) continue;
            std::string problem;
            try {
                EventRecord e = decode_event(line);
                if (e.seq <= last) {
                    problem = "sequence " + std::to_string(e.seq) + " does not increase";
                } else {
                    last = e.seq;
                    out.events.push_back(std::move(e));
                    continue;
                }
            } catch (const std::invalid_argument& e) {
                problem = e.what();
            }
            Corruption c{file.filename().string(), number, last, problem};
            if (!tolerant) {
                throw StorageError(c.file + ":" + std::to_string(c.line) + " (after seq " + std::to_string(last) +
                                   "): " + c.message);
            }
            out.corruptions.push_back(std::move(c));
        }
    }
    return out;
}

EventLog::EventLog(fs::path dir, LogOptions options) : dir_(std::move(dir)), options_(std::move(options)) {
    if (!options_.clock) options_.clock = [] { return std::chrono::system_clock::now(); };
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw StorageError("cannot create " + dir_.string() + ": " + ec.message());
    auto existing = read_log(dir_, true);
    if (!existing.events.empty()) seq_ = existing.events.back().seq;
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::last_seq() const {
    std::lock_guard lock(mutex_);
    return seq_;
}

void EventLog::open_day(const std::string& day) {
    if (fd_ >= 0 && day == day_) return;
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    const fs::path path = dir_ / (std::string(kPrefix) + day + std::string(kSuffix));
    // A crash can leave a partial last line; start on a fresh one so the
    // next record is not glued to it.
    bool needs_newline = false;
    if (std::FILE* probe = std::fopen(path.c_str(), "rb")) {
        if (std::fseek(probe, -1, SEEK_END) == 0) needs_newline = std::fgetc(probe) != '\n';
        std::fclose(probe);
    }
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StorageError("cannot open " + path.string() + ": " + errno_text());
    day_ = day;
    if (needs_newline && !write_all(fd_, "\n")) {
        throw StorageError("cannot write " + path.string() + ": " + errno_text());
    }
}

std::uint64_t EventLog::append(const std::string& session_id, EventKind kind, nlohmann::ordered_json payload) {
    std::lock_guard lock(mutex_);
    EventRecord e;
    e.seq = seq_ + 1;
    e.timestamp = format_timestamp(options_.clock());
    e.session_id = session_id;
    e.kind = kind;
    e.payload = payload.is_null() ? nlohmann::ordered_json::object() : std::move(payload);
    if (!e.payload.is_object()) throw std::invalid_argument("event payload must be an object");
    open_day(e.timestamp.substr(0, 10));
    const std::string line = encode_event(e);
    if (!write_all(fd_, line)) throw StorageError("append failed: " + errno_text());
    if (options_.sync && ::fsync(fd_) != 0 && errno != EINVAL && errno != EROFS) {
        throw StorageError("fsync failed: " + errno_text());
    }
    seq_ = e.seq;
    return e.seq;
}

}  // namespace examforge::store
