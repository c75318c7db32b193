void rotate_left(int *xs, int n) {
    if (n < 2)
        return;
    int first = xs[0];
    for (int i = 0; i + 1 < n; i++)
        xs[i] = xs[i + 1];
    xs[n - 1] = first;
}
