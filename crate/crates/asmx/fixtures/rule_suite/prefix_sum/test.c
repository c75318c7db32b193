#include "asmx_test.h"

void prefix_sum(int *xs, int n);

static int xs[] = {1, 2, 3, 4, 5};

int main(void) {
    int failed = 0;
    CHECK(failed, (prefix_sum(xs, 5), xs[4] == 15));
    CHECK(failed, xs[0] == 1);
    CHECK(failed, xs[2] == 6);
    return failed;
}
