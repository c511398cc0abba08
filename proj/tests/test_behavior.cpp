#include "doctest.h"

TEST_SUITE("behavior") {}
