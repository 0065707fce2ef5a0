#include "triad/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <regex>
#include <set>
#include <sstream>

#include "triad/errors.hpp"

namespace triad::metrics {

namespace {

using nlohmann::json;

constexpr double kZ95 = 1.96;

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string fmt(double v, int decimals) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double find_header_value(const std::string& doc, const char* pattern, const char* label) {
    const std::regex re(std::string(pattern) + R"(\s*:?\s*(-?[0-9]+(?:\.[0-9]+)?)\s*%?)",
                        std::regex::icase);
    std::smatch match;
    if (!std::regex_search(doc, match, re)) {
        throw ParseError(std::string("missing header: ") + label);
    }
    return std::stod(match[1].str());
}

std::vector<std::string> split_into_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

int heading_level(const std::string& line) {
    std::size_t hashes = 0;
    while (hashes < line.size() && line[hashes] == '#') ++hashes;
    if (hashes == 0 || hashes > 6) return 0;
    if (hashes < line.size() && line[hashes] != ' ' && line[hashes] != '\t') return 0;
    return static_cast<int>(hashes);
}

// A section starts at a heading line containing the phrase (case-insensitive)
// and ends at the next heading of equal or higher level.
std::optional<std::string> find_section(const std::string& doc, const std::string& phrase) {
    const std::string needle = lowercase(phrase);
    const auto lines = split_into_lines(doc);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int level = heading_level(lines[i]);
        if (level == 0 || lowercase(lines[i]).find(needle) == std::string::npos) continue;
        std::string body;
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            const int inner = heading_level(lines[j]);
            if (inner != 0 && inner <= level) break;
            body += lines[j];
            body += '\n';
        }
        return body;
    }
    return std::nullopt;
}

long count_top_level_items(const std::string& section) {
    // Nested sub-bullets (indented two or more spaces) are not counted.
    static const std::regex item(R"(^\s{0,1}(?:[-*+]|[0-9]+[.)])\s+\S)");
    long count = 0;
    for (const auto& line : split_into_lines(section)) {
        if (std::regex_search(line, item)) ++count;
    }
    return count;
}

GroupStats make_group_stats(long n_runs, long accepted, long rejected) {
    GroupStats g;
    g.n_runs = n_runs;
    g.accepted = accepted;
    g.rejected = rejected;
    const long total = accepted + rejected;
    g.acceptance_pct = total > 0 ? round_half_up(100.0 * accepted / total, 1) : 0.0;
    if (accepted > 0) {
        g.propositions_per_accepted = round_half_up(static_cast<double>(total) / accepted, 2);
    }
    return g;
}

json run_to_json(const RunMetrics& r) {
    json j{{"run", r.run_id},
           {"accepted", r.tally.accepted},
           {"rejected", r.tally.rejected},
           {"propositions", r.tally.total()},
           {"acceptance_rate_pct", r.acceptance_rate_pct},
           {"ai_a_pct", r.breakdown.ai_a_pct},
           {"ai_b_pct", r.breakdown.ai_b_pct},
           {"convergent_pct", r.breakdown.convergent_pct},
           {"arbitration_pct", r.breakdown.arbitration_pct},
           {"total_ai_pct", r.total_ai_pct},
           {"max_contributor", to_string(r.max_contributor)},
           {"arbitration_flag", r.arbitration_flag},
           {"convergence_flag", r.convergence_flag}};
    if (r.propositions_per_accepted) {
        j["propositions_per_accepted"] = *r.propositions_per_accepted;
    } else {
        j["propositions_per_accepted"] = nullptr;
    }
    return j;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string to_string(Contributor c) {
    switch (c) {
        case Contributor::ai_a: return "AI_A";
        case Contributor::ai_b: return "AI_B";
        case Contributor::convergent: return "Convergent";
        case Contributor::arbitration: return "Arbitration";
    }
    return "Convergent";
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::floor(value * scale + 0.5) / scale;
}

ContributionBreakdown parse_contributions(const std::string& doc) {
    if (doc.empty()) {
        throw ParseError("empty document");
    }
    ContributionBreakdown b;
    b.ai_a_pct = find_header_value(doc, R"(AI\^A\s+CONTRIBUTION)", "AI^A CONTRIBUTION");
    b.ai_b_pct = find_header_value(doc, R"(AI\^B\s+CONTRIBUTION)", "AI^B CONTRIBUTION");
    b.convergent_pct = find_header_value(doc, R"(CONVERGENT\s*\(\s*BOTH\s+AGREED\s*\))",
                                         "CONVERGENT (BOTH AGREED)");
    b.arbitration_pct = find_header_value(doc, R"(FINAL\s+ARBITRATION)", "FINAL ARBITRATION");

    for (const auto& [value, label] :
         {std::pair{b.ai_a_pct, "AI^A CONTRIBUTION"}, {b.ai_b_pct, "AI^B CONTRIBUTION"},
          {b.convergent_pct, "CONVERGENT (BOTH AGREED)"}, {b.arbitration_pct,
                                                           "FINAL ARBITRATION"}}) {
        if (value < 0.0 || value > 100.0) {
            throw ParseError(std::string(label) + " must be in [0, 100], got " + shortest(value));
        }
    }
    const double sum = b.ai_a_pct + b.ai_b_pct + b.convergent_pct + b.arbitration_pct;
    if (sum < 99.0 || sum > 101.0) {
        throw ParseError("contribution percentages sum to " + shortest(sum) +
                         ", expected 100 +/- 1");
    }
    return b;
}

std::string render_contribution_headers(const ContributionBreakdown& b) {
    std::string out = "## CONTRIBUTION BREAKDOWN\n\n";
    out += "AI^A CONTRIBUTION: " + shortest(b.ai_a_pct) + "%\n";
    out += "AI^B CONTRIBUTION: " + shortest(b.ai_b_pct) + "%\n";
    out += "CONVERGENT (BOTH AGREED): " + shortest(b.convergent_pct) + "%\n";
    out += "FINAL ARBITRATION: " + shortest(b.arbitration_pct) + "%\n";
    return out;
}

FixTally count_fixes(const std::string& doc) {
    const auto accepted_section = find_section(doc, "DEFINITIVE FIX LIST");
    if (!accepted_section) {
        throw ParseError("missing section: DEFINITIVE FIX LIST");
    }

    // Distinct fix numbers, so in-section cross-references do not inflate
    // the tally.
    static const std::regex fix_entry(R"(fix\s*#\s*([0-9]+))", std::regex::icase);
    std::set<long> fix_numbers;
    for (auto it = std::sregex_iterator(accepted_section->begin(), accepted_section->end(),
                                        fix_entry);
         it != std::sregex_iterator(); ++it) {
        fix_numbers.insert(std::stol((*it)[1].str()));
    }

    FixTally tally;
    tally.accepted = static_cast<long>(fix_numbers.size());
    const auto rejected_section = find_section(doc, "REJECTED FIXES");
    tally.rejected = rejected_section ? count_top_level_items(*rejected_section) : 0;
    return tally;
}

double acceptance_rate(const FixTally& tally) {
    if (tally.total() <= 0) {
        throw ParseError("acceptance rate undefined: no fix propositions");
    }
    return round_half_up(100.0 * static_cast<double>(tally.accepted) / tally.total(), 1);
}

std::pair<bool, bool> compute_flags(const ContributionBreakdown& b) {
    return {b.arbitration_pct >= 50.0, b.convergent_pct >= 75.0};
}

Contributor max_contributor(const ContributionBreakdown& b) {
    // Precedence order resolves ties: Convergent > AI_B > AI_A > Arbitration.
    const std::pair<Contributor, double> candidates[] = {
        {Contributor::convergent, b.convergent_pct},
        {Contributor::ai_b, b.ai_b_pct},
        {Contributor::ai_a, b.ai_a_pct},
        {Contributor::arbitration, b.arbitration_pct},
    };
    auto best = candidates[0];
    for (const auto& candidate : candidates) {
        if (candidate.second > best.second) best = candidate;
    }
    return best.first;
}

double efficiency(const FixTally& tally) {
    if (tally.accepted <= 0) {
        throw ParseError("efficiency undefined: no accepted fixes");
    }
    return round_half_up(static_cast<double>(tally.total()) / tally.accepted, 2);
}

RunMetrics analyze_document(const std::string& doc, const std::string& run_id) {
    RunMetrics r;
    r.run_id = run_id;
    r.breakdown = parse_contributions(doc);
    r.tally = count_fixes(doc);
    r.acceptance_rate_pct = acceptance_rate(r.tally);
    r.total_ai_pct = r.breakdown.ai_a_pct + r.breakdown.ai_b_pct;
    r.max_contributor = max_contributor(r.breakdown);
    std::tie(r.arbitration_flag, r.convergence_flag) = compute_flags(r.breakdown);
    if (r.tally.accepted > 0) {
        r.propositions_per_accepted = efficiency(r.tally);
    }
    return r;
}

std::pair<double, double> acceptance_ci_95(long accepted, long total, CiMethod method) {
    if (total <= 0) {
        throw ParseError("confidence interval undefined: no fix propositions");
    }
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(accepted) / n;
    double low = 0.0;
    double high = 0.0;
    if (method == CiMethod::wald) {
        const double half = kZ95 * std::sqrt(p * (1.0 - p) / n);
        low = p - half;
        high = p + half;
    } else {
        const double z2 = kZ95 * kZ95;
        const double denom = 1.0 + z2 / n;
        const double center = (p + z2 / (2.0 * n)) / denom;
        const double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        low = center - half;
        high = center + half;
    }
    low = std::clamp(low, 0.0, 1.0);
    high = std::clamp(high, 0.0, 1.0);
    return {round_half_up(low * 100.0, 1), round_half_up(high * 100.0, 1)};
}

AggregateMetrics aggregate(const std::vector<RunMetrics>& runs,
                           const std::map<std::string, std::string>& labels, CiMethod ci_method) {
    if (runs.empty()) {
        throw ParseError("aggregate undefined: no runs");
    }
    AggregateMetrics agg;
    agg.n_runs = static_cast<long>(runs.size());

    std::map<std::string, std::pair<long, long>> group_totals;  // label -> (acc, rej)
    std::map<std::string, long> group_counts;
    for (const auto& r : runs) {
        agg.total_accepted += r.tally.accepted;
        agg.total_rejected += r.tally.rejected;
        agg.mean_propositions += static_cast<double>(r.tally.total());
        agg.mean_acceptance_pct += r.acceptance_rate_pct;
        agg.mean_ai_a_pct += r.breakdown.ai_a_pct;
        agg.mean_ai_b_pct += r.breakdown.ai_b_pct;
        agg.mean_convergent_pct += r.breakdown.convergent_pct;
        agg.mean_arbitration_pct += r.breakdown.arbitration_pct;
        agg.mean_total_ai_pct += r.total_ai_pct;
        auto it = labels.find(r.run_id);
        if (it != labels.end()) {
            group_totals[it->second].first += r.tally.accepted;
            group_totals[it->second].second += r.tally.rejected;
            group_counts[it->second] += 1;
        }
    }
    const long grand_total = agg.total_accepted + agg.total_rejected;
    if (grand_total <= 0) {
        throw ParseError("aggregate undefined: no fix propositions across runs");
    }
    agg.overall_acceptance_pct = round_half_up(100.0 * agg.total_accepted / grand_total, 1);
    agg.wald_ci_95 = acceptance_ci_95(agg.total_accepted, grand_total, ci_method);

    const double n = static_cast<double>(agg.n_runs);
    agg.mean_propositions /= n;
    agg.mean_acceptance_pct /= n;
    agg.mean_ai_a_pct /= n;
    agg.mean_ai_b_pct /= n;
    agg.mean_convergent_pct /= n;
    agg.mean_arbitration_pct /= n;
    agg.mean_total_ai_pct /= n;

    for (const auto& [label, totals] : group_totals) {
        agg.groups[label] = make_group_stats(group_counts[label], totals.first, totals.second);
    }
    return agg;
}

std::string to_json(const std::vector<RunMetrics>& runs, const AggregateMetrics& agg) {
    json runs_json = json::array();
    for (const auto& r : runs) runs_json.push_back(run_to_json(r));

    json groups = json::object();
    for (const auto& [label, g] : agg.groups) {
        json gj{{"n_runs", g.n_runs},
                {"accepted", g.accepted},
                {"rejected", g.rejected},
                {"acceptance_pct", g.acceptance_pct}};
        if (g.propositions_per_accepted) {
            gj["propositions_per_accepted"] = *g.propositions_per_accepted;
        } else {
            gj["propositions_per_accepted"] = nullptr;
        }
        groups[label] = gj;
    }
    json doc{{"runs", runs_json},
             {"aggregate",
              {{"n_runs", agg.n_runs},
               {"total_accepted", agg.total_accepted},
               {"total_rejected", agg.total_rejected},
               {"total_propositions", agg.total_accepted + agg.total_rejected},
               {"overall_acceptance_pct", agg.overall_acceptance_pct},
               {"ci_95", {agg.wald_ci_95.first, agg.wald_ci_95.second}},
               {"mean_propositions", agg.mean_propositions},
               {"mean_acceptance_pct", agg.mean_acceptance_pct},
               {"mean_ai_a_pct", agg.mean_ai_a_pct},
               {"mean_ai_b_pct", agg.mean_ai_b_pct},
               {"mean_convergent_pct", agg.mean_convergent_pct},
               {"mean_arbitration_pct", agg.mean_arbitration_pct},
               {"mean_total_ai_pct", agg.mean_total_ai_pct},
               {"groups", groups}}}};
    return doc.dump(2) + "\n";
}

std::string to_table(const std::vector<RunMetrics>& runs, const AggregateMetrics& agg) {
    std::size_t id_width = 3;
    for (const auto& r : runs) id_width = std::max(id_width, r.run_id.size());

    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %5s  %6s  %6s  %6s  %6s  %6s  %-11s  %s\n",
                  static_cast<int>(id_width), "run", "props", "acc%", "AI^A", "AI^B", "conv",
                  "arb", "max", "flags");
    out << line;
    for (const auto& r : runs) {
        std::string flags;
        if (r.arbitration_flag) flags += 'A';
        if (r.convergence_flag) flags += 'C';
        if (flags.empty()) flags = "-";
        std::snprintf(line, sizeof line,
                      "%-*s  %5ld  %6.1f  %6.1f  %6.1f  %6.1f  %6.1f  %-11s  %s\n",
                      static_cast<int>(id_width), r.run_id.c_str(), r.tally.total(),
                      r.acceptance_rate_pct, r.breakdown.ai_a_pct, r.breakdown.ai_b_pct,
                      r.breakdown.convergent_pct, r.breakdown.arbitration_pct,
                      to_string(r.max_contributor).c_str(), flags.c_str());
        out << line;
    }

    out << "\nruns: " << agg.n_runs << "  accepted: " << agg.total_accepted
        << "  rejected: " << agg.total_rejected
        << "  propositions: " << (agg.total_accepted + agg.total_rejected) << "\n";
    out << "overall acceptance: " << fmt(agg.overall_acceptance_pct, 1) << "%  (95% CI "
        << fmt(agg.wald_ci_95.first, 1) << " - " << fmt(agg.wald_ci_95.second, 1) << ")\n";
    out << "mean propositions: " << fmt(agg.mean_propositions, 1)
        << "  mean acceptance: " << fmt(agg.mean_acceptance_pct, 1) << "%\n";
    out << "mean contributions: AI^A " << fmt(agg.mean_ai_a_pct, 1) << "  AI^B "
        << fmt(agg.mean_ai_b_pct, 1) << "  convergent " << fmt(agg.mean_convergent_pct, 1)
        << "  arbitration " << fmt(agg.mean_arbitration_pct, 1) << "\n";
    if (!agg.groups.empty()) {
        out << "groups:\n";
        for (const auto& [label, g] : agg.groups) {
            out << "  " << label << ": " << g.accepted << "/" << (g.accepted + g.rejected)
                << " accepted (" << fmt(g.acceptance_pct, 1) << "%)";
            if (g.propositions_per_accepted) {
                out << ", " << fmt(*g.propositions_per_accepted, 2)
                    << " propositions per accepted fix";
            }
            out << "\n";
        }
    }
    return out.str();
}

std::string to_csv(const std::vector<RunMetrics>& runs,
                   const std::map<std::string, std::string>& labels) {
    std::string out =
        "run,propositions,acceptance_rate_pct,ai_a_pct,ai_b_pct,arbitrator_pct,convergent_pct,"
        "accepted,rejected,total_ai_pct,max_contributor,arbitration_flag,convergence_flag,"
        "label\n";
    for (const auto& r : runs) {
        auto it = labels.find(r.run_id);
        out += csv_escape(r.run_id) + "," + std::to_string(r.tally.total()) + "," +
               fmt(r.acceptance_rate_pct, 1) + "," + fmt(r.breakdown.ai_a_pct, 1) + "," +
               fmt(r.breakdown.ai_b_pct, 1) + "," + fmt(r.breakdown.arbitration_pct, 1) + "," +
               fmt(r.breakdown.convergent_pct, 1) + "," + std::to_string(r.tally.accepted) + "," +
               std::to_string(r.tally.rejected) + "," + fmt(r.total_ai_pct, 1) + "," +
               to_string(r.max_contributor) + "," + (r.arbitration_flag ? "true" : "false") +
               "," + (r.convergence_flag ? "true" : "false") + "," +
               (it != labels.end() ? csv_escape(it->second) : "") + "\n";
    }
    return out;
}

}  // namespace triad::metrics
