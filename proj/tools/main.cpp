#include <iostream>

#include "commands.hpp"
#include "criteria.hpp"

int main(int argc, char** argv) {
    dass::cli::Hooks hooks;
    hooks.repro_acceptance = [](std::ostream& out) { return dass::acceptance::run_all(out) ? 0 : 1; };
    return dass::cli::run(argc, argv, std::cout, std::cerr, hooks);
}
