#include "asmx_test.h"

unsigned bit_reverse8(unsigned x);

int main(void) {
    int failed = 0;
    CHECK(failed, bit_reverse8(1) == 128);
    CHECK(failed, bit_reverse8(0xf0) == 0x0f);
    CHECK(failed, bit_reverse8(0xa5) == 0xa5);
    return failed;
}
