#include "doctest.h"

TEST_SUITE("wire") {}
