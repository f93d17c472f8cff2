#include "petseg/cli.hpp"

int main(int argc, char** argv) { return petseg::cli_main(argc, argv); }
