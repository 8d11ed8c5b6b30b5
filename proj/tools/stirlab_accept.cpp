#include "harness.hpp"

int main(int argc, char** argv) { return stirlab::harness::main_entry(argc, argv, true); }
