#include "asmx_test.h"

int array_max(const int *xs, int n);

static const int xs[] = {-5, 11, 3, 10};

int main(void) {
    int failed = 0;
    CHECK(failed, array_max(xs, 4) == 11);
    CHECK(failed, array_max(xs, 1) == -5);
    return failed;
}
