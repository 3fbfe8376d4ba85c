#include "leray/cli.hpp"

int main(int argc, char** argv) { return leray::cli::cli_main(argc, argv); }
