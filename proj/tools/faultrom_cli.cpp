#include "faultrom/cli.hpp"

int main(int argc, char** argv) { return faultrom::cli::run(argc, argv); }
