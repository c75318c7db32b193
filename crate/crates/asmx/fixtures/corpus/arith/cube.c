long cube(long x) {
    return x * x * x;
}
