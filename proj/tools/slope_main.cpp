#include "slope/cli.hpp"

int main(int argc, char** argv) { return slope::cli::main(argc, argv); }
