#include "doctest.h"

TEST_SUITE("thermal") {}
