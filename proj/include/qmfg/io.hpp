#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace qmfg::io {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Appends format_double(v) to out.
void append_double(std::string& out, double v);

/// Exact inverse of format_double; throws std::invalid_argument on junk.
double parse_double(std::string_view text);

/// Writes to "<path>.tmp" and renames onto path on commit(). An uncommitted
/// file is removed on destruction.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path);
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile();

    void write(std::string_view chunk);
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Minimal CSV reader for the files this tool writes: header plus numeric rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Two-column series "x_name,y_name" written atomically.
void write_series(const std::filesystem::path& path, std::string_view x_name, std::string_view y_name,
                  const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qmfg::io
