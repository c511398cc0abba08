#include "doctest.h"

TEST_SUITE("objective") {}
