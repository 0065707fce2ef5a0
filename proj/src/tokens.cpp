#include "triad/tokens.hpp"

#include <cmath>

#include "triad/errors.hpp"

namespace triad::tokens {

namespace {

// Splits text into lines, each keeping its trailing newline. A final
// unterminated segment is returned as-is.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start + 1));
        start = nl + 1;
    }
    return lines;
}

}  // namespace

TokenBudget make_budget(long context_limit_tokens, double safety_margin) {
    if (context_limit_tokens <= 0) {
        throw BudgetError("context_limit_tokens must be positive");
    }
    if (safety_margin <= 0.0 || safety_margin > 1.0) {
        throw BudgetError("safety_margin must be in (0, 1]");
    }
    TokenBudget b;
    b.context_limit_tokens = context_limit_tokens;
    b.safety_margin = safety_margin;
    b.effective_tokens =
        static_cast<long>(std::floor(static_cast<double>(context_limit_tokens) * safety_margin));
    if (b.effective_tokens < 1) {
        throw BudgetError("effective token budget is below one token");
    }
    return b;
}

long estimate_from_chars(std::size_t char_count, double ratio) {
    if (char_count == 0) return 0;
    return static_cast<long>(std::ceil(static_cast<double>(char_count) * ratio));
}

long estimate_tokens(std::string_view text, double ratio) {
    return estimate_from_chars(corpus::count_chars(text), ratio);
}

std::string elision_marker(const std::string& rel_path) {
    return "# ===== TRUNCATED: " + rel_path + " (remaining content elided) =====";
}

std::vector<CorpusChunk> chunk_corpus(const corpus::Corpus& corpus, const TokenBudget& budget,
                                      double ratio, long reserved_tokens) {
    if (corpus.files.empty()) {
        throw InputError("cannot chunk an empty corpus");
    }
    const long ceiling = budget.effective_tokens - reserved_tokens;
    if (ceiling < 1) {
        throw BudgetError("prompt scaffolding exceeds the effective token budget (" +
                          std::to_string(budget.effective_tokens) + " tokens, " +
                          std::to_string(reserved_tokens) + " reserved)");
    }
    auto fits = [&](std::size_t chars) { return estimate_from_chars(chars, ratio) <= ceiling; };

    std::vector<CorpusChunk> chunks;
    CorpusChunk current;
    std::size_t current_chars = 0;

    auto close_current = [&]() {
        if (current.file_count == 0) return;
        current.estimated_tokens = estimate_from_chars(current_chars, ratio);
        chunks.push_back(std::move(current));
        current = CorpusChunk{};
        current_chars = 0;
    };

    for (std::size_t k = 0; k < corpus.files.size(); ++k) {
        const auto& file = corpus.files[k];
        const std::string header = corpus::header_line(file.rel_path) + "\n";
        const std::size_t unit_chars =
            corpus::count_chars(header) + file.char_count + 1;  // + trailing newline

        if (current.file_count > 0 && fits(current_chars + unit_chars)) {
            current.text += header;
            current.text += file.content;
            current.text += '\n';
            current_chars += unit_chars;
            current.file_count += 1;
            continue;
        }
        close_current();

        if (fits(unit_chars)) {
            current.first_file = k;
            current.file_count = 1;
            current.text = header + file.content + "\n";
            current_chars = unit_chars;
            continue;
        }

        // Lone oversized file: keep whole lines while they fit, then elide.
        const std::string marker = elision_marker(file.rel_path) + "\n";
        const std::size_t base_chars = corpus::count_chars(header);
        const std::size_t marker_chars = corpus::count_chars(marker);

        std::string kept;
        std::size_t kept_chars = 0;
        std::size_t kept_lines = 0;
        for (std::string_view line : split_lines(file.content)) {
            const std::size_t line_chars = corpus::count_chars(line);
            if (!fits(base_chars + kept_chars + line_chars + marker_chars)) break;
            kept.append(line.data(), line.size());
            kept_chars += line_chars;
            ++kept_lines;
        }
        if (kept_lines == 0) {
            throw BudgetError("token budget cannot hold the header, one line, and the elision "
                              "marker for file '" +
                              file.rel_path + "'");
        }

        CorpusChunk truncated;
        truncated.first_file = k;
        truncated.file_count = 1;
        truncated.text = header + kept + marker;
        truncated.estimated_tokens = estimate_from_chars(base_chars + kept_chars + marker_chars,
                                                         ratio);
        truncated.truncated = true;
        chunks.push_back(std::move(truncated));
    }
    close_current();

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        chunks[i].index = static_cast<int>(i + 1);
    }
    return chunks;
}

}  // namespace triad::tokens
