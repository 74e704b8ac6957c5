#include "qlo/cli.hpp"

int main(int argc, char** argv) { return qlo::cli::main(argc, argv); }
