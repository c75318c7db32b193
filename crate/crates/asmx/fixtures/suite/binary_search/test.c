#include "asmx_test.h"

int binary_search(const int *xs, int n, int key);

static const int xs[] = {1, 2, 3, 5, 9, 12, 20};

int main(void) {
    int failed = 0;
    CHECK(failed, binary_search(xs, 7, 9) == 4);
    CHECK(failed, binary_search(xs, 7, 1) == 0);
    CHECK(failed, binary_search(xs, 7, 4) == -1);
    return failed;
}
