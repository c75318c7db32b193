#include "asmx_test.h"

int sum(const int *xs, int n);

static const int xs[] = {1, 2, 3, 4};

int main(void) {
    int failed = 0;
    CHECK(failed, sum(xs, 4) == 10);
    return failed;
}
