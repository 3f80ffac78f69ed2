#include "doctest.h"

TEST_SUITE("csvio") {}
