#include "asmx_test.h"

int is_prime(int n);

int main(void) {
    int failed = 0;
    CHECK(failed, is_prime(2));
    CHECK(failed, is_prime(97));
    CHECK(failed, !is_prime(91));
    CHECK(failed, !is_prime(1));
    return failed;
}
