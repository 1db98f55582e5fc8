#include "qpm/cli.hpp"

int main(int argc, char** argv) { return qpm::run_cli(argc, argv); }
