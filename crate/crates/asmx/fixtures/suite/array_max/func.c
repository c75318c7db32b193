int array_max(const int *xs, int n) {
    int m = xs[0];
    for (int i = 1; i < n; i++)
        if (xs[i] > m)
            m = xs[i];
    return m;
}
