#include "asmx_test.h"

int store_one(int v);

int main(void) {
    int failed = 0;
    CHECK(failed, store_one(5) == 0);
    return failed;
}
