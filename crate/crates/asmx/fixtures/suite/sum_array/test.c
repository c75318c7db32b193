#include "asmx_test.h"

int sum_array(const int *xs, int n);

static const int xs[] = {1, 4, -2, 1, 5};

int main(void) {
    int failed = 0;
    CHECK(failed, sum_array(xs, 5) == 9);
    CHECK(failed, sum_array(xs, 0) == 0);
    CHECK(failed, sum_array(xs + 2, 2) == -1);
    return failed;
}
