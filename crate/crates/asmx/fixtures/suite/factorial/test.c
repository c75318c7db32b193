#include "asmx_test.h"

long factorial(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, factorial(0) == 1);
    CHECK(failed, factorial(5) == 120);
    CHECK(failed, factorial(12) == 479001600);
    return failed;
}
