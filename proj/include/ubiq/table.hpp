#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ubiq/errors.hpp"

namespace ubiq {

inline constexpr const char* kVersion = "0.1.0";

// Numeric table with ordered metadata. Every artifact carries enough metadata
// (command, parameters, seed, grid, version) to rerun the command exactly.
struct Table {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_meta(const std::string& key, const std::string& value) {
        meta.emplace_back(key, value);
    }
    void add_meta(const std::string& key, double value) {
        meta.emplace_back(key, format_number(value));
    }

    static std::string format_number(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
};

enum class TableFormat { Csv, Json };

inline TableFormat parse_format(const std::string& name) {
    if (name == "csv") return TableFormat::Csv;
    if (name == "json") return TableFormat::Json;
    throw ConfigError("unknown output format '" + name + "' (expected csv or json)");
}

inline void write_csv(const Table& table, std::ostream& out) {
    for (const auto& [k, v] : table.meta) out << "# " << k << " = " << v << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << Table::format_number(row[c]);
        out << "\n";
    }
}

inline void write_json(const Table& table, std::ostream& out) {
    nlohmann::ordered_json j;
    j["meta"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.meta) j["meta"][k] = v;
    j["columns"] = table.columns;
    j["rows"] = table.rows;
    out << j.dump(1) << "\n";
}

inline void write_table(const Table& table, std::ostream& out, TableFormat format) {
    if (format == TableFormat::Csv) write_csv(table, out);
    else write_json(table, out);
}

inline void write_table_file(const Table& table, const std::string& path, TableFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    write_table(table, out, format);
}

}  // namespace ubiq
