#include "ckh/cli.hpp"

int main(int argc, char** argv) { return ckh::cli_main(argc, argv); }
