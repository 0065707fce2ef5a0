#include <vector>

#include "triad/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    triad::cli::Deps deps = triad::cli::default_deps();
    return triad::cli::dispatch(args, deps);
}
