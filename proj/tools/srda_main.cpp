#include "srda/cli.hpp"

int main(int argc, char** argv) { return srda::cli::run(argc, argv); }
