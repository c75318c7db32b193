#include "asmx_test.h"

int ipow(int base, int exp);

int main(void) {
    int failed = 0;
    CHECK(failed, ipow(2, 10) == 1024);
    CHECK(failed, ipow(3, 0) == 1);
    CHECK(failed, ipow(-3, 3) == -27);
    CHECK(failed, ipow(7, 5) == 16807);
    return failed;
}
