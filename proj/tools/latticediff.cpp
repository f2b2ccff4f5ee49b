#include <latticediff/cli.hpp>

int main(int argc, char** argv) { return latticediff::cli::run(argc, argv); }
