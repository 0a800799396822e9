// actlang: command-line front end for the activity tokenisation pipeline.

#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) { return actlang::cli::run_main(std::vector<std::string>(argv + 1, argv + argc)); }
