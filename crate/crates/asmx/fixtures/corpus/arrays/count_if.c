int count_greater(const int *xs, int n, int t) {
    int c = 0;
    for (int i = 0; i < n; i++)
        if (xs[i] > t)
            c++;
    return c;
}
