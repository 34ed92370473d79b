#pragma once

#include <string>
#include <vector>

namespace tmc {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // -1 when the column is absent.
    int column(const std::string& name) const;
};

// RFC-4180 style reader: quoted fields, embedded commas/quotes/newlines.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string csv_escape(const std::string& field);
std::string csv_join(const std::vector<std::string>& fields);

}  // namespace tmc
