#include "hbm/cli.hpp"

int main(int argc, char** argv) { return hbm::dispatch(argc, argv); }
