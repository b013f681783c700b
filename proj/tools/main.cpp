#include "pbdw/cli.hpp"

int main(int argc, char** argv) { return pbdw::cli_main(argc, argv); }
