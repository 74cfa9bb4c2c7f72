#include "agemix/cli.hpp"

int main(int argc, char** argv) { return agemix::cli::run(argc, argv); }
