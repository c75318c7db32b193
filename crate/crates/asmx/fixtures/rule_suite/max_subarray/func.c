int max_subarray(const int *xs, int n) {
    int best = xs[0], cur = 0;
    for (int i = 0; i < n; i++) {
        cur += xs[i];
        if (cur > best)
            best = cur;
        if (cur < 0)
            cur = 0;
    }
    return best;
}
