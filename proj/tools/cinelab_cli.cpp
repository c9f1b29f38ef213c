#include "cinelab/cli.hpp"

int main(int argc, char** argv) { return cinelab::run_cli(argc, argv); }
