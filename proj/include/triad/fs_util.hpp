#pragma once

#include <filesystem>
#include <string>

namespace triad::fsu {

// Reads a whole file as bytes. Throws InputError if the file cannot be read.
std::string read_file(const std::filesystem::path& path);

// Writes content to path, creating parent directories as needed.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace triad::fsu
