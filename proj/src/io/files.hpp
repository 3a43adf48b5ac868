#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace polyscore::io {

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace polyscore::io
