#include "asmx_test.h"

int popcount(unsigned x);

int main(void) {
    int failed = 0;
    CHECK(failed, popcount(0) == 0);
    CHECK(failed, popcount(0xff) == 8);
    CHECK(failed, popcount(0x80000001u) == 2);
    return failed;
}
