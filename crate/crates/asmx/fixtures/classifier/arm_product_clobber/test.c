#include "asmx_test.h"

int product(const int *xs, int n);

static const int xs[] = {1, 2, 3, 4};

int main(void) {
    int failed = 0;
    CHECK(failed, product(xs, 4) == 24);
    return failed;
}
