#include "asmx_test.h"

int triangle(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, triangle(0) == 0);
    CHECK(failed, triangle(4) == 10);
    CHECK(failed, triangle(100) == 5050);
    return failed;
}
