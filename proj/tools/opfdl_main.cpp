#include "opfdl/cli.hpp"

int main(int argc, char** argv) { return opfdl::run_cli(argc, argv); }
