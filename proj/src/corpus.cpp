#include "triad/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "triad/errors.hpp"
#include "triad/fs_util.hpp"

namespace triad::corpus {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";  // U+FFFD

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool extension_allowed(const fs::path& file) {
    const std::string ext = lowercase(file.extension().string());
    if (ext.empty()) return false;
    const auto& allowed = supported_extensions();
    return std::find(allowed.begin(), allowed.end(), ext) != allowed.end();
}

void walk(const fs::path& dir, const std::string& rel_prefix,
          const std::vector<std::string>& excluded_dirs, std::vector<SourceFile>& out) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string rel = rel_prefix.empty() ? name : rel_prefix + "/" + name;
        if (entry.is_symlink()) {
            continue;  // never follow symlinks
        }
        if (entry.is_directory()) {
            if (std::find(excluded_dirs.begin(), excluded_dirs.end(), name) !=
                excluded_dirs.end()) {
                continue;
            }
            walk(entry.path(), rel, excluded_dirs, out);
            continue;
        }
        if (!entry.is_regular_file() || !extension_allowed(entry.path())) {
            continue;
        }
        auto [text, lossy] = decode_bytes(fsu::read_file(entry.path()));
        SourceFile f;
        f.rel_path = rel;
        f.char_count = count_chars(text);
        f.content = std::move(text);
        f.lossy_decoded = lossy;
        out.push_back(std::move(f));
    }
}

}  // namespace

std::size_t count_chars(std::string_view utf8) {
    std::size_t n = 0;
    for (unsigned char c : utf8) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::pair<std::string, bool> decode_bytes(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    bool lossy = false;

    int needed = 0;
    unsigned char lower = 0x80;
    unsigned char upper = 0xBF;
    std::string pending;

    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto b = static_cast<unsigned char>(bytes[i]);
        if (needed == 0) {
            if (b <= 0x7F) {
                out += static_cast<char>(b);
                ++i;
                continue;
            }
            if (b >= 0xC2 && b <= 0xDF) {
                needed = 1;
            } else if (b == 0xE0) {
                needed = 2;
                lower = 0xA0;
            } else if ((b >= 0xE1 && b <= 0xEC) || b == 0xEE || b == 0xEF) {
                needed = 2;
            } else if (b == 0xED) {
                needed = 2;
                upper = 0x9F;
            } else if (b == 0xF0) {
                needed = 3;
                lower = 0x90;
            } else if (b >= 0xF1 && b <= 0xF3) {
                needed = 3;
            } else if (b == 0xF4) {
                needed = 3;
                upper = 0x8F;
            } else {
                out += kReplacement;
                lossy = true;
                ++i;
                continue;
            }
            pending.assign(1, static_cast<char>(b));
            ++i;
            continue;
        }
        if (b < lower || b > upper) {
            // Maximal-subpart failure: one replacement, reprocess this byte.
            out += kReplacement;
            lossy = true;
            needed = 0;
            lower = 0x80;
            upper = 0xBF;
            pending.clear();
            continue;
        }
        pending += static_cast<char>(b);
        lower = 0x80;
        upper = 0xBF;
        ++i;
        if (static_cast<int>(pending.size()) == needed + 1) {
            out += pending;  // valid sequence passes through byte-for-byte
            pending.clear();
            needed = 0;
        }
    }
    if (needed != 0) {
        out += kReplacement;
        lossy = true;
    }
    return {std::move(out), lossy};
}

std::string header_line(const std::string& rel_path) {
    return "# ===== " + rel_path + " =====";
}

const std::vector<std::string>& supported_extensions() {
    static const std::vector<std::string> exts = {
        ".py",  ".js",    ".java", ".cpp", ".c",   ".h",    ".cs",  ".php", ".rb",   ".go",
        ".rs",  ".ts",    ".jsx",  ".tsx", ".vue", ".swift", ".kt",  ".scala", ".r",  ".sql",
        ".html", ".css",  ".json", ".xml", ".yaml", ".yml",  ".md",  ".txt"};
    return exts;
}

const std::vector<std::string>& default_excluded_dirs() {
    static const std::vector<std::string> dirs = {".git",  "__pycache__", "node_modules",
                                                  "build", "dist",        "target",
                                                  ".venv", "venv",        ".idea",
                                                  ".vscode"};
    return dirs;
}

Corpus scan_codebase(const std::filesystem::path& root,
                     const std::vector<std::string>& excluded_dirs) {
    if (!fs::exists(root)) {
        throw InputError("codebase root not found: " + root.string());
    }
    if (!fs::is_directory(root)) {
        throw InputError("codebase root is not a directory: " + root.string());
    }

    Corpus corpus;
    corpus.root = root;
    try {
        walk(root, "", excluded_dirs, corpus.files);
    } catch (const fs::filesystem_error& e) {
        throw InputError(std::string("codebase scan failed: ") + e.what());
    }
    if (corpus.files.empty()) {
        throw InputError("no supported source files found under: " + root.string());
    }

    std::sort(corpus.files.begin(), corpus.files.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.rel_path < b.rel_path; });

    for (const auto& f : corpus.files) {
        corpus.assembled_text += header_line(f.rel_path);
        corpus.assembled_text += '\n';
        corpus.assembled_text += f.content;
        corpus.assembled_text += '\n';
    }
    corpus.total_chars = count_chars(corpus.assembled_text);
    return corpus;
}

}  // namespace triad::corpus
