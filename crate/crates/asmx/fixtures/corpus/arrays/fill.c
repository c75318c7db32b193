void fill(int *xs, int n, int v) {
    for (int i = 0; i < n; i++)
        xs[i] = v;
}
