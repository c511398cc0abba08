#include "doctest.h"

TEST_SUITE("online") {}
