#include "asmx_test.h"

int get(const int *xs, int i);

static const int xs[] = {1, 2, 3, 4};

int main(void) {
    int failed = 0;
    CHECK(failed, get(xs, 2) == 3);
    return failed;
}
