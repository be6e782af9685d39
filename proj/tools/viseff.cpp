#include "viseff/cli.hpp"

int main(int argc, char** argv) { return viseff::cli::run(argc, argv); }
