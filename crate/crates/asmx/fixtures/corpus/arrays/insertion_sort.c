void insertion_sort(int *xs, int n) {
    for (int i = 1; i < n; i++) {
        int key = xs[i];
        int j = i - 1;
        while (j >= 0 && xs[j] > key) {
            xs[j + 1] = xs[j];
            j--;
        }
        xs[j + 1] = key;
    }
}
