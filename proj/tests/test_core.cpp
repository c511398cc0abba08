#include "doctest.h"

TEST_SUITE("core") {}
