#pragma once

#include "snapdir/config.hpp"
#include "snapdir/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace snapdir::feed {

/// The canonical snapshot CSV header.
const std::string& csv_header();

enum class FileFormat { Csv, Ndjson };

struct ParseReport {
    std::size_t rows_read = 0;
    std::size_t rows_accepted = 0;
    std::size_t rows_rejected = 0;
    std::map<std::string, std::size_t> rejected_by_reason;
    std::size_t rows_with_absent_levels = 0;

    double rejected_fraction() const noexcept {
        return rows_read == 0 ? 0.0 : static_cast<double>(rows_rejected) / static_cast<double>(rows_read);
    }
};

struct ParseResult {
    std::vector<Session> sessions;
    ParseReport report;
};

/// Reads a snapshot file (format picked by extension: .ndjson/.jsonl vs CSV), validates
/// every row, groups accepted rows into sessions and sorts them by timestamp.
///
/// Throws DataIntegrityError when the file is unreadable, a mandatory column is missing,
/// or the rejected fraction exceeds cfg.max_malformed_fraction.
ParseResult parse_snapshot_file(const std::filesystem::path& path, const FeedConfig& cfg);

ParseResult parse_snapshot_stream(std::istream& in, FileFormat format, const FeedConfig& cfg);

/// Groups already validated snapshots into sessions. Input order does not matter;
/// duplicate timestamps per instrument keep the first occurrence and count as rejected.
std::vector<Session> group_sessions(std::vector<Snapshot> snapshots, const FeedConfig& cfg, ParseReport& report);

/// Wraps one session's ordered snapshots, deriving id, trading day and bounds.
Session make_session(std::vector<Snapshot> snapshots, const FeedConfig& cfg);

/// Writes sessions in canonical CSV form (header + rows, absent levels as empty fields).
void write_csv(std::ostream& out, const std::vector<Session>& sessions);
void write_csv_row(std::string& out, const Snapshot& s, const TickScale& scale);

void write_ndjson(std::ostream& out, const std::vector<Session>& sessions);

}  // namespace snapdir::feed
