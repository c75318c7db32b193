#include "asmx_test.h"

void reverse(char *s, int n);

static char buf[] = "hello";

int main(void) {
    int failed = 0;
    CHECK(failed, (reverse(buf, 5), buf[0] == 'o'));
    CHECK(failed, buf[4] == 'h');
    CHECK(failed, buf[2] == 'l');
    return failed;
}
