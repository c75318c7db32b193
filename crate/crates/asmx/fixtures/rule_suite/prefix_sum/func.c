void prefix_sum(int *xs, int n) {
    for (int i = 1; i < n; i++)
        xs[i] += xs[i - 1];
}
