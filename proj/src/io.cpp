#include "slfv/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "slfv/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "snapshot and log formats are little-endian");

namespace slfv {

namespace {

void append_raw(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <typename T>
T read_raw(const std::string& data, std::size_t& pos, const char* what) {
    if (pos + sizeof(T) > data.size())
        throw std::runtime_error(std::string("unexpected end of file while reading ") + what);
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

void write_binary(const std::filesystem::path& path, const std::string& data) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return data;
}

}  // namespace

void write_field_snapshot(const std::filesystem::path& path, const Field& f) {
    std::string out;
    out.reserve(32 + 8 * f.size());
    out.append("SLFV", 4);
    std::uint32_t version = 1, d = static_cast<std::uint32_t>(f.grid.d),
                  n = static_cast<std::uint32_t>(f.grid.n);
    append_raw(out, &version, 4);
    append_raw(out, &d, 4);
    append_raw(out, &n, 4);
    append_raw(out, &f.grid.length, 8);
    std::uint64_t count = f.size();
    append_raw(out, &count, 8);
    append_raw(out, f.v.data(), 8 * f.size());
    write_binary(path, out);
}

Field read_field_snapshot(const std::filesystem::path& path) {
    std::string data = read_binary(path);
    std::size_t pos = 0;
    if (data.size() < 4 || data.compare(0, 4, "SLFV") != 0)
        throw std::runtime_error("not a field snapshot: " + path.string());
    pos = 4;
    auto version = read_raw<std::uint32_t>(data, pos, "version");
    if (version != 1) throw std::runtime_error("unsupported snapshot version");
    auto d = read_raw<std::uint32_t>(data, pos, "dimension");
    auto n = read_raw<std::uint32_t>(data, pos, "cells");
    auto length = read_raw<double>(data, pos, "length");
    auto count = read_raw<std::uint64_t>(data, pos, "count");
    Field f(TorusGrid(static_cast<int>(d), static_cast<int>(n), length));
    if (count != f.size()) throw std::runtime_error("snapshot cell count mismatch");
    if (pos + 8 * count > data.size()) throw std::runtime_error("snapshot truncated");
    std::memcpy(f.v.data(), data.data() + pos, 8 * count);
    return f;
}

void write_event_log_file(const std::filesystem::path& path, const std::string& config_text,
                          const std::vector<char>& records) {
    std::string out;
    out.reserve(64 + config_text.size() + records.size());
    out.append("SLFVLOG", 7);
    out.push_back('\0');
    std::uint32_t version = 1;
    append_raw(out, &version, 4);
    std::uint64_t hash = fnv1a64(config_text);
    append_raw(out, &hash, 8);
    std::uint64_t len = config_text.size();
    append_raw(out, &len, 8);
    out.append(config_text);
    out.append(records.data(), records.size());
    write_binary(path, out);
}

EventLogFile read_event_log_file(const std::filesystem::path& path) {
    std::string data = read_binary(path);
    if (data.size() < 8 || data.compare(0, 7, "SLFVLOG") != 0)
        throw std::runtime_error("not an event log: " + path.string());
    std::size_t pos = 8;
    auto version = read_raw<std::uint32_t>(data, pos, "version");
    if (version != 1) throw std::runtime_error("unsupported event log version");
    EventLogFile log;
    log.config_hash = read_raw<std::uint64_t>(data, pos, "config hash");
    auto len = read_raw<std::uint64_t>(data, pos, "config length");
    if (pos + len > data.size()) throw std::runtime_error("event log truncated in config text");
    log.config_text = data.substr(pos, len);
    pos += len;
    if (fnv1a64(log.config_text) != log.config_hash)
        throw std::runtime_error("event log config hash mismatch");
    log.records.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
    return log;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : path_(path), columns_(columns.size()) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += columns[i];
    }
    buffer_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw std::invalid_argument("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += format17(values[i]);
    }
    buffer_ += '\n';
}

void CsvWriter::row_mixed(const std::vector<std::string>& values) {
    if (values.size() != columns_) throw std::invalid_argument("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += values[i];
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    write_binary(path_, buffer_);
    closed_ = true;
}

void emit_plot_data(const std::filesystem::path& path, const std::string& name,
                    const std::vector<double>& x, const std::vector<double>& y,
                    const std::string& x_label, const std::string& y_label) {
    if (x.size() != y.size()) throw std::invalid_argument("emit_plot_data: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw std::invalid_argument("emit_plot_data: non-finite value at index " +
                                        std::to_string(i));
    std::string out = "# " + name + "\n# columns: " + x_label + " " + y_label + "\n";
    if (x.empty()) out += "# warning: empty series\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        out += format17(x[i]) + " " + format17(y[i]) + "\n";
    write_binary(path, out);
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    std::string out;
    out += "config.hash = " + std::to_string(manifest.config_hash) + "\n";
    out += "code.version = " + manifest.code_version + "\n";
    out += "kind = " + manifest.kind + "\n";
    out += "seed = " + std::to_string(manifest.seed) + "\n";
    out += "status = " + manifest.status + "\n";
    out += "wallclock.seconds = " + format17(manifest.wall_seconds) + "\n";
    for (const auto& a : manifest.artifacts) out += "artifact = " + a + "\n";
    for (const auto& w : manifest.warnings) out += "warning = " + w + "\n";
    write_binary(path, out);
}

std::string read_text_file(const std::filesystem::path& path) { return read_binary(path); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_binary(path, text);
}

}  // namespace slfv
