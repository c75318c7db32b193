#include "asmx_test.h"

int mask(int v);

int main(void) {
    int failed = 0;
    CHECK(failed, mask(0x1ff) == 257);
    return failed;
}
