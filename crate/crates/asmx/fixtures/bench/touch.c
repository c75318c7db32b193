/* Allocates and touches argv[1] MiB so peak RSS is known from below. */
#include <stdlib.h>
#include <string.h>

int main(int argc, char **argv) {
    size_t mib = argc > 1 ? strtoul(argv[1], 0, 10) : 16;
    char *p = malloc(mib << 20);
    if (!p)
        return 1;
    memset(p, 1, mib << 20);
    return p[(mib << 20) - 1] == 1 ? 0 : 2;
}
