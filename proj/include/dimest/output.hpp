#pragma once

// Deterministic CSV and JSON emission. Numbers are printed with a fixed
// format so re-runs with the same seed produce byte-identical files.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dimest/error.hpp"

namespace dimest {

using Json = nlohmann::json;

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Hash of the canonical (key-sorted, compact) dump of a JSON document.
inline std::string json_hash(const Json& j) { return fnv1a_hex(j.dump()); }

using CsvCell = std::variant<std::int64_t, double, std::string>;

/// In-memory table written as CSV. The first line is a comment carrying the
/// producing recipe and config hash; column names carry units in brackets.
class CsvTable {
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
        detail::require(!columns_.empty(), "CsvTable: no columns");
    }

    void add(std::vector<CsvCell> row) {
        if (row.size() != columns_.size())
            throw ContractViolation("CsvTable: row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(columns_.size()));
        rows_.push_back(std::move(row));
    }

    [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }
    [[nodiscard]] const std::vector<std::vector<CsvCell>>& rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }

    [[nodiscard]] std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i] == name) return i;
        throw InvalidInput("CsvTable: no column '" + name + "'");
    }

    /// Numeric view of one column; string cells are parsed.
    [[nodiscard]] std::vector<double> numbers(const std::string& name) const {
        const auto c = column_index(name);
        std::vector<double> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(as_number(r[c]));
        return out;
    }

    [[nodiscard]] std::string str(const std::string& recipe, const std::string& config_hash) const {
        std::ostringstream os;
        os << "# recipe=" << recipe << " config_hash=" << config_hash << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
            os << '\n';
        }
        return os.str();
    }

    void write(const std::filesystem::path& path, const std::string& recipe, const std::string& config_hash) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream os(path, std::ios::binary);
        if (!os) throw InvalidInput("cannot write " + path.string());
        os << str(recipe, config_hash);
    }

    /// Reads a file written by `write`. The comment line is returned through `meta`.
    static CsvTable read(const std::filesystem::path& path, std::string* meta = nullptr) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw InvalidInput("cannot read " + path.string());
        std::string line;
        if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw InvalidInput(path.string() + ": missing header comment");
        if (meta) *meta = line.substr(2);
        if (!std::getline(is, line)) throw InvalidInput(path.string() + ": missing column row");
        CsvTable t(split(line));
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            auto cells = split(line);
            std::vector<CsvCell> row(cells.begin(), cells.end());
            t.add(std::move(row));
        }
        return t;
    }

private:
    static std::string cell_text(const CsvCell& c) {
        if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
        if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
        const auto& s = std::get<std::string>(c);
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }

    static double as_number(const CsvCell& c) {
        if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
        if (const auto* d = std::get_if<double>(&c)) return *d;
        const auto& s = std::get<std::string>(c);
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw InvalidInput("CsvTable: '" + s + "' is not a number");
    }

    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cur += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                out.push_back(std::move(cur));
                cur.clear();
            } else if (ch != '\r') {
                cur += ch;
            }
        }
        out.push_back(std::move(cur));
        return out;
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<CsvCell>> rows_;
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

inline Json read_json(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot read " + path.string());
    try {
        return Json::parse(is);
    } catch (const Json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

}  // namespace dimest
