#include "raschsel/cli.hpp"

int main(int argc, char** argv) { return raschsel::cli::run_command(argc, argv); }
