#include "dcscan/cli.hpp"

int main(int argc, char** argv) { return dcscan::cli_run(argc, argv); }
