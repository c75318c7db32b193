#include "asmx_test.h"

int clamp(int x, int lo, int hi);

int main(void) {
    int failed = 0;
    CHECK(failed, clamp(5, 0, 10) == 5);
    CHECK(failed, clamp(-5, 0, 10) == 0);
    CHECK(failed, clamp(50, 0, 10) == 10);
    return failed;
}
