#include "asmx_test.h"

void bubble_sort(int *xs, int n);

static int xs[] = {7, 42, 0, -3, 9, 5};

int main(void) {
    int failed = 0;
    CHECK(failed, (bubble_sort(xs, 6), xs[0] == -3));
    CHECK(failed, xs[1] == 0);
    CHECK(failed, xs[5] == 42);
    CHECK(failed, xs[3] == 7);
    return failed;
}
