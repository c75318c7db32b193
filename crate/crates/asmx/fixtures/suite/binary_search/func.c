int binary_search(const int *xs, int n, int key) {
    int lo = 0, hi = n - 1;
    while (lo <= hi) {
        int mid = lo + (hi - lo) / 2;
        if (xs[mid] == key)
            return mid;
        if (xs[mid] < key)
            lo = mid + 1;
        else
            hi = mid - 1;
    }
    return -1;
}
