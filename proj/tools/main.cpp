#include "dfdr/cli.hpp"

int main(int argc, char** argv) { return dfdr::run_cli(argc, argv); }
