#include "mir/cli.hpp"

int main(int argc, char** argv) { return mir::run_cli(argc, argv); }
