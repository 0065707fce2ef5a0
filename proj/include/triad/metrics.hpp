#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace triad::metrics {

// Percentages from the four standardized contribution headers.
struct ContributionBreakdown {
    double ai_a_pct = 0.0;
    double ai_b_pct = 0.0;
    double convergent_pct = 0.0;
    double arbitration_pct = 0.0;

    bool operator==(const ContributionBreakdown&) const = default;
};

struct FixTally {
    long accepted = 0;
    long rejected = 0;
    long total() const { return accepted + rejected; }

    bool operator==(const FixTally&) const = default;
};

enum class Contributor { ai_a, ai_b, convergent, arbitration };
std::string to_string(Contributor c);

struct RunMetrics {
    std::string run_id;
    ContributionBreakdown breakdown;
    FixTally tally;
    double acceptance_rate_pct = 0.0;  // rounded half-up to 1 decimal
    double total_ai_pct = 0.0;         // ai_a + ai_b
    Contributor max_contributor = Contributor::convergent;
    bool arbitration_flag = false;
    bool convergence_flag = false;
    std::optional<double> propositions_per_accepted;  // absent when accepted == 0
};

struct GroupStats {
    long n_runs = 0;
    long accepted = 0;
    long rejected = 0;
    double acceptance_pct = 0.0;
    std::optional<double> propositions_per_accepted;
};

struct AggregateMetrics {
    long n_runs = 0;
    long total_accepted = 0;
    long total_rejected = 0;
    double overall_acceptance_pct = 0.0;
    std::pair<double, double> wald_ci_95{0.0, 0.0};
    double mean_propositions = 0.0;
    double mean_acceptance_pct = 0.0;
    double mean_ai_a_pct = 0.0;
    double mean_ai_b_pct = 0.0;
    double mean_convergent_pct = 0.0;
    double mean_arbitration_pct = 0.0;
    double mean_total_ai_pct = 0.0;
    std::map<std::string, GroupStats> groups;
};

// Rounds half-up at the final reporting step; internal math is full precision.
double round_half_up(double value, int decimals);

// Extracts the percentage after each of the four standardized headers
// (AI^A CONTRIBUTION, AI^B CONTRIBUTION, CONVERGENT (BOTH AGREED),
// FINAL ARBITRATION), case-insensitively, tolerating whitespace and '%'.
// A missing header is a parse error naming it.
ContributionBreakdown parse_contributions(const std::string& doc);

// Renders the standardized header block; parse(render(b)) == b.
std::string render_contribution_headers(const ContributionBreakdown& breakdown);

// accepted = count of distinct `Fix #N` entries in the DEFINITIVE FIX LIST
// section; rejected = top-level list items in the REJECTED FIXES section
// (0 if that section is absent).
FixTally count_fixes(const std::string& doc);

double acceptance_rate(const FixTally& tally);

// (arbitration_flag, convergence_flag): arbitration >= 50, convergent >= 75.
std::pair<bool, bool> compute_flags(const ContributionBreakdown& breakdown);

// Argmax over the four categories; ties resolve by the fixed precedence
// Convergent > AI_B > AI_A > Arbitration.
Contributor max_contributor(const ContributionBreakdown& breakdown);

// total / accepted, reported to 2 decimals. Undefined when accepted == 0.
double efficiency(const FixTally& tally);

RunMetrics analyze_document(const std::string& doc, const std::string& run_id);

enum class CiMethod { wald, wilson };
std::pair<double, double> acceptance_ci_95(long accepted, long total,
                                           CiMethod method = CiMethod::wald);

AggregateMetrics aggregate(const std::vector<RunMetrics>& runs,
                           const std::map<std::string, std::string>& labels = {},
                           CiMethod ci_method = CiMethod::wald);

// Report renderers: one JSON document, one aligned-column table, and a CSV
// whose leading columns mirror the per-run summary table.
std::string to_json(const std::vector<RunMetrics>& runs, const AggregateMetrics& agg);
std::string to_table(const std::vector<RunMetrics>& runs, const AggregateMetrics& agg);
std::string to_csv(const std::vector<RunMetrics>& runs,
                   const std::map<std::string, std::string>& labels = {});

}  // namespace triad::metrics
