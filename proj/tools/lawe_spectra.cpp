#include "lawe/cli.hpp"

int main(int argc, char** argv) { return lawe::cli::run(argc, argv); }
