#include "asmx_test.h"

int reverse_digits(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, reverse_digits(123) == 321);
    CHECK(failed, reverse_digits(-45) == -54);
    CHECK(failed, reverse_digits(1200) == 21);
    return failed;
}
