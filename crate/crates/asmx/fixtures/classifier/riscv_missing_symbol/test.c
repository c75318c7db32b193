#include "asmx_test.h"

int twice(int v);

int main(void) {
    int failed = 0;
    CHECK(failed, twice(4) == 8);
    return failed;
}
