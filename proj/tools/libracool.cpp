#include "libracool/cli.hpp"

int main(int argc, char** argv) { return libracool::run_cli(argc, argv); }
