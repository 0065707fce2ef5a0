#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "triad/corpus.hpp"

namespace triad::tokens {

// effective_tokens = floor(context_limit_tokens * safety_margin), always >= 1.
struct TokenBudget {
    long context_limit_tokens = 0;
    double safety_margin = 0.75;
    long effective_tokens = 0;

    bool operator==(const TokenBudget&) const = default;
};

TokenBudget make_budget(long context_limit_tokens, double safety_margin);

// ceil(char_count * ratio); characters are Unicode code points.
long estimate_from_chars(std::size_t char_count, double ratio);
long estimate_tokens(std::string_view text, double ratio);

// A budget-respecting, file-boundary-aligned segment of the corpus.
struct CorpusChunk {
    int index = 1;              // 1-based
    std::size_t first_file = 0;  // index into corpus.files
    std::size_t file_count = 0;
    std::string text;
    long estimated_tokens = 0;
    bool truncated = false;
};

std::string elision_marker(const std::string& rel_path);

// Greedy first-fit packing in corpus order. Whole files (header + content)
// are appended while the estimate stays within the packing ceiling
// (effective_tokens - reserved_tokens); a lone file that exceeds the ceiling
// is truncated at the last line boundary that fits, with the elision marker
// appended. Concatenating chunk texts reproduces the assembled corpus text
// except at elision points.
std::vector<CorpusChunk> chunk_corpus(const corpus::Corpus& corpus, const TokenBudget& budget,
                                      double ratio, long reserved_tokens = 0);

}  // namespace triad::tokens
