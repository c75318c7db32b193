#include "asmx_test.h"

int gcd(int a, int b);

int main(void) {
    int failed = 0;
    CHECK(failed, gcd(48, 18) == 6);
    CHECK(failed, gcd(17, 5) == 1);
    CHECK(failed, gcd(0, 9) == 9);
    CHECK(failed, gcd(-12, 8) == 4);
    return failed;
}
