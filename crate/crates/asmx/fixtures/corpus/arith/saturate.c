int saturating_add(int a, int b) {
    long s = (long)a + b;
    if (s > 2147483647L)
        return 2147483647;
    if (s < -2147483647L - 1)
        return -2147483647 - 1;
    return (int)s;
}
