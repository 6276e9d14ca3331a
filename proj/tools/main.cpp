#include "tripath/cli.hpp"

int main(int argc, char** argv) { return tripath::cli::main(argc, argv); }
