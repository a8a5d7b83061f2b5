#include "mixchoice/cli.hpp"

int main(int argc, char** argv) { return mixchoice::cli::run(argc, argv); }
