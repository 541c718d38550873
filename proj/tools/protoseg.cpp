#include "protoseg/cli.hpp"

int main(int argc, char** argv) { return protoseg::run_cli(argc, argv); }
