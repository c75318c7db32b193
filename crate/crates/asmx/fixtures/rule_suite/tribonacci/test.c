#include "asmx_test.h"

int tribonacci(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, tribonacci(0) == 0);
    CHECK(failed, tribonacci(2) == 1);
    CHECK(failed, tribonacci(10) == 81);
    return failed;
}
