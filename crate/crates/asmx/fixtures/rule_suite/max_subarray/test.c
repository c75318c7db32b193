#include "asmx_test.h"

int max_subarray(const int *xs, int n);

static const int xs[] = {-2, 1, -3, 4, -1, 2, 1, -5, 4};

int main(void) {
    int failed = 0;
    CHECK(failed, max_subarray(xs, 9) == 6);
    CHECK(failed, max_subarray(xs, 1) == -2);
    return failed;
}
