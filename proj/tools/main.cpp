#include "ptgan/cli.hpp"

int main(int argc, char** argv) { return ptgan::cli_run(argc, argv); }
