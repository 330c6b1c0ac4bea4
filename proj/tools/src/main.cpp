#include "lowlight_cli/cli.hpp"

int main(int argc, char** argv) { return lowlight::cli::run(argc, argv); }
