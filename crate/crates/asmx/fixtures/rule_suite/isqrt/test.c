#include "asmx_test.h"

unsigned isqrt(unsigned n);

int main(void) {
    int failed = 0;
    CHECK(failed, isqrt(0) == 0);
    CHECK(failed, isqrt(15) == 3);
    CHECK(failed, isqrt(16) == 4);
    CHECK(failed, isqrt(1000000) == 1000);
    return failed;
}
