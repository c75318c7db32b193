unsigned mod_pow(unsigned b, unsigned e, unsigned m) {
    unsigned r = 1;
    b %= m;
    while (e > 0) {
        if (e & 1)
            r = r * b % m;
        b = b * b % m;
        e >>= 1;
    }
    return r;
}
