#include "asmx_test.h"

int add3(int a, int b, int c);

int main(void) {
    int failed = 0;
    CHECK(failed, add3(1, 2, 3) == 6);
    CHECK(failed, add3(10, 0, 0) == 10);
    return failed;
}
