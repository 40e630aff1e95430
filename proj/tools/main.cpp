#include "cli.hpp"

int main(int argc, char** argv) { return rbflow::cli::main(argc, argv); }
