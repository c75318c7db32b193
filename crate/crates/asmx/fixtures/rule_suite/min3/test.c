#include "asmx_test.h"

int min3(int a, int b, int c);

int main(void) {
    int failed = 0;
    CHECK(failed, min3(1, 2, 3) == 1);
    CHECK(failed, min3(5, -4, 3) == -4);
    CHECK(failed, min3(9, 9, 2) == 2);
    return failed;
}
