#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace tlab {

using json = nlohmann::json;

// 17 significant digits (%.17g); non-finite values print as nan/inf.
std::string fmt17(double v);

// Writes through a temporary file and renames, so readers never see a
// half-written artifact. Creates parent directories.
void write_file_atomic(const std::filesystem::path& p, const std::string& content);
std::string read_file(const std::filesystem::path& p);

// Minimal CSV builder: a header row and rows of preformatted cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    CsvTable& row(std::vector<std::string> cells);
    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;  // -1 when absent
};

// Plain comma-separated text without quoting, as written by CsvTable.
CsvData parse_csv(const std::string& text);

// Two whitespace-separated columns, '#' header line, for gnuplot.
std::string two_column(const std::string& title, const std::vector<double>& x, const std::vector<double>& y);

// Pretty JSON with a trailing newline. Doubles are written in the shortest
// form that reads back to the same bits.
std::string dump_json(const json& j);

}  // namespace tlab
