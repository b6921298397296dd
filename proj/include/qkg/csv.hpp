#pragma once

#include <string>
#include <vector>

namespace qkg {

// Minimal RFC-4180 CSV support shared by the result and case writers.
std::string csv_escape(const std::string& field);
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::string> csv_split(const std::string& line);

// Reads all rows including the header; errors on unreadable files.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace qkg
