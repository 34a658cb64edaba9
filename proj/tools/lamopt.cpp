#include "lamopt/cli.hpp"

int main(int argc, char** argv) { return lamopt::run(argc, argv); }
