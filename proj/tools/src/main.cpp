#include "commands.hpp"

int main(int argc, char** argv) { return owlkit::cli::run(argc, argv); }
