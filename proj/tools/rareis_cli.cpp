#include <rareis/bench.hpp>

#include <iostream>

int main(int argc, char** argv) { return rareis::bench::run_cli(argc, argv, std::cout, std::cerr); }
