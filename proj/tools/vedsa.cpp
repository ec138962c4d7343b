#include "vedsa/cli.hpp"

int main(int argc, char** argv) { return vedsa::run_cli(argc, argv); }
