#include "qmfg/io.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace qmfg::io {

void append_double(std::string& out, double v) {
    char buf[32];
    // -0.0 would print as "-0"; the files never need the distinction.
    if (v == 0.0) v = 0.0;
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

double parse_double(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return v;
}

AtomicFile::AtomicFile(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    tmp_ = path_;
    tmp_ += ".tmp";
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + tmp_.string() + " for writing");
}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_, ec);
    }
}

void AtomicFile::write(std::string_view chunk) {
    out_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
}

void AtomicFile::commit() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed for " + tmp_.string());
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    AtomicFile f(path);
    f.write(contents);
    f.commit();
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable table;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = s.find(',', start);
            out.push_back(s.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const std::string& cell : split(line)) row.push_back(parse_double(cell));
        if (row.size() != table.header.size()) throw std::runtime_error(path.string() + ": ragged row");
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_series(const std::filesystem::path& path, std::string_view x_name, std::string_view y_name,
                  const std::vector<double>& x, const std::vector<double>& y) {
    std::string out;
    out.append(x_name).append(",").append(y_name).append("\n");
    for (std::size_t i = 0; i < x.size(); ++i) {
        append_double(out, x[i]);
        out.push_back(',');
        append_double(out, y[i]);
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

}  // namespace qmfg::io
