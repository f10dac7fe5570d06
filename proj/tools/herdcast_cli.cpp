#include "herdcast/app/cli.hpp"

int main(int argc, char** argv) { return herdcast::app::run_cli(argc, argv); }
