#include "asmx_test.h"

long fib(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, fib(0) == 0);
    CHECK(failed, fib(1) == 1);
    CHECK(failed, fib(10) == 55);
    CHECK(failed, fib(40) == 102334155);
    return failed;
}
