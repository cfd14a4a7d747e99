#include "orsp/cli.hpp"

int main(int argc, char** argv) { return orsp::run_cli(argc, argv); }
