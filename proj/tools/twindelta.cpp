#include "twindelta/cli.hpp"

int main(int argc, char** argv) { return twindelta::cli::run(argc, argv); }
