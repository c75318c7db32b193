#include "asmx_test.h"

int count_char(const char *s, char c);

int main(void) {
    int failed = 0;
    CHECK(failed, count_char("banana", 'a') == 3);
    CHECK(failed, count_char("", 'x') == 0);
    CHECK(failed, count_char("mississippi", 's') == 4);
    return failed;
}
