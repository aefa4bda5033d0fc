#include "rcsnet/cli.hpp"

int main(int argc, char** argv) { return rcsnet::run_cli(argc, argv); }
