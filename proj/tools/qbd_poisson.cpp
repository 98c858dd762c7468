#include "qbd/cli.hpp"

int main(int argc, char** argv) { return qbd::cli::run(argc, argv); }
