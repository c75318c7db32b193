#include "asmx_test.h"

int digit_sum(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, digit_sum(0) == 0);
    CHECK(failed, digit_sum(1234) == 10);
    CHECK(failed, digit_sum(99999) == 45);
    return failed;
}
