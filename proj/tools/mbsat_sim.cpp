#include "mbsat/cli.hpp"

int main(int argc, char** argv) { return mbsat::cli::run_main(argc, argv); }
