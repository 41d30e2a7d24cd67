// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/cli.hh"

int main(int argc, char** argv) { return topika::run_cli(argc, argv); }
