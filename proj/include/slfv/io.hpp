#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slfv/grid.hpp"

namespace slfv {

// Field snapshot file: "SLFV" magic, u32 version, u32 d, u32 n, f64 L,
// u64 count, then row-major little-endian f64 cell values.
void write_field_snapshot(const std::filesystem::path& path, const Field& f);
Field read_field_snapshot(const std::filesystem::path& path);

// Event log file: "SLFVLOG\0" magic, u32 version, u64 config hash,
// u64 config length, the full config text, then the raw event records
// produced by the engine. Embedding the text makes a log self-contained.
void write_event_log_file(const std::filesystem::path& path, const std::string& config_text,
                          const std::vector<char>& records);

struct EventLogFile {
    std::uint64_t config_hash = 0;
    std::string config_text;
    std::vector<char> records;
};
EventLogFile read_event_log_file(const std::filesystem::path& path);

// CSV with a header row; all numbers printed with 17 significant digits.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& values);
    void close();

  private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_ = 0;
    bool closed_ = false;
};

// Two-column plain-text series with a '#' comment header. Non-finite
// values are rejected with their index; an empty series produces a
// header-only file carrying a warning line.
void emit_plot_data(const std::filesystem::path& path, const std::string& name,
                    const std::vector<double>& x, const std::vector<double>& y,
                    const std::string& x_label = "x", const std::string& y_label = "y");

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::string code_version;
    std::uint64_t seed = 0;
    std::string kind;
    std::string status;  // running | complete
    double wall_seconds = 0.0;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace slfv
