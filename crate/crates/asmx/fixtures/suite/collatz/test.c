#include "asmx_test.h"

int collatz_steps(unsigned n);

int main(void) {
    int failed = 0;
    CHECK(failed, collatz_steps(1) == 0);
    CHECK(failed, collatz_steps(6) == 8);
    CHECK(failed, collatz_steps(27) == 111);
    return failed;
}
