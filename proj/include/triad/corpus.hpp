#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace triad::corpus {

// One ingested source file. char_count is the content length in Unicode
// code points (lossy-decoded bytes count as one U+FFFD each).
struct SourceFile {
    std::string rel_path;  // forward slashes, relative to the scanned root
    std::string content;
    std::size_t char_count = 0;
    bool lossy_decoded = false;

    bool operator==(const SourceFile&) const = default;
};

// Ordered, delimiter-assembled view of a codebase. Files are sorted
// byte-wise by rel_path; assembled_text is the concatenation of
// "# ===== <rel_path> =====\n" + content + "\n" per file.
struct Corpus {
    std::filesystem::path root;
    std::vector<SourceFile> files;
    std::string assembled_text;
    std::size_t total_chars = 0;
};

// Counts Unicode code points in UTF-8 text (continuation bytes excluded).
std::size_t count_chars(std::string_view utf8);

// Total decode: valid UTF-8 passes through unchanged, invalid sequences
// become U+FFFD per the standard replacement policy. Returns (text, lossy).
std::pair<std::string, bool> decode_bytes(std::string_view bytes);

std::string header_line(const std::string& rel_path);

const std::vector<std::string>& supported_extensions();
const std::vector<std::string>& default_excluded_dirs();

// Recursive scan of root collecting supported extensions (case-insensitive
// on the final suffix), excluding the given directory names and skipping
// symlinks. Throws InputError for a missing root or an empty result.
Corpus scan_codebase(const std::filesystem::path& root,
                     const std::vector<std::string>& excluded_dirs = default_excluded_dirs());

}  // namespace triad::corpus
