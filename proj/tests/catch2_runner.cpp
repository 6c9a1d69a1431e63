// Single translation unit for the amalgamated Catch2 implementation
// (provides the default main).
#include <catch2/catch_amalgamated.cpp>
