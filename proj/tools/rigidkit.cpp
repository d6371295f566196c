#include "rigidkit/cli.hpp"

int main(int argc, char** argv) { return rigidkit::cli::main(argc, argv); }
