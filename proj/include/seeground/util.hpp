#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace seeground {

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace seeground
