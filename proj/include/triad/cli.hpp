#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "triad/config.hpp"
#include "triad/corpus.hpp"
#include "triad/providers.hpp"

namespace triad::cli {

// Injected effects so the whole command surface is testable with scripted
// transports and a fake clock.
struct Deps {
    std::function<std::unique_ptr<providers::HttpTransport>()> make_transport;
    providers::Sleeper* sleeper = nullptr;
    config::EnvMap env;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

Deps default_deps();

struct ConnectivityCheck {
    std::string provider_id;
    std::string status;  // "ok" | "skipped" | "error"
    std::string payload;
};

struct HeadroomCheck {
    std::string role;
    std::string provider_id;
    long corpus_estimate = 0;
    long effective_budget = 0;
    int chunk_count = 0;
    bool feasible = false;
};

struct PreflightReport {
    std::vector<ConnectivityCheck> connectivity;
    std::vector<HeadroomCheck> headroom;
    bool pass = false;
};

PreflightReport preflight(const config::Config& cfg, const corpus::Corpus& corpus,
                          const Deps& deps);

// Entry point for `triad <subcommand> ...`; args excludes the program name.
// Returns the process exit code (0 ok, 1 input/config, 2 provider/network,
// 3 budget, 4 parse).
int dispatch(const std::vector<std::string>& args, const Deps& deps);

}  // namespace triad::cli
