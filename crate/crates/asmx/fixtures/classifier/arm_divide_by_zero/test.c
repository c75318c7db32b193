#include "asmx_test.h"

int ratio(int a, int b);

int main(void) {
    int failed = 0;
    CHECK(failed, ratio(12, 4) == 3);
    return failed;
}
