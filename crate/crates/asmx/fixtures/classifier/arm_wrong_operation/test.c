#include "asmx_test.h"

int diff(int a, int b);

int main(void) {
    int failed = 0;
    CHECK(failed, diff(9, 4) == 5);
    return failed;
}
