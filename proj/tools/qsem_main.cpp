#include "qsem/cli.hpp"

int main(int argc, char** argv) { return qsem::cli::run(argc, argv); }
