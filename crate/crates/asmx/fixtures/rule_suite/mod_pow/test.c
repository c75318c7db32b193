#include "asmx_test.h"

unsigned mod_pow(unsigned b, unsigned e, unsigned m);

int main(void) {
    int failed = 0;
    CHECK(failed, mod_pow(2, 10, 1000) == 24);
    CHECK(failed, mod_pow(3, 200, 13) == 9);
    CHECK(failed, mod_pow(5, 0, 7) == 1);
    return failed;
}
