#include "detcal/cli.hpp"

int main(int argc, char** argv) { return detcal::cli::main_entry(argc, argv); }
