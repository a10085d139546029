#include "app.hpp"

int main(int argc, char** argv) { return gas::app::run_cli(argc, argv); }
