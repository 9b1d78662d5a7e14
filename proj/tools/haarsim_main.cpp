#include "haarsim/cli.hpp"

int main(int argc, char** argv) { return haarsim::run_cli(argc, argv); }
