"""Published selected table counts and b / log2 n ratios, keyed by (code length, n)."""

NS = [1e4, 1e5, 1e6, 2e6, 5e6, 1e7, 2e7, 5e7, 1e8, 2e8, 5e8, 1e9]

SELECTED_M = {
    64: [5, 4, 4, 3, 3, 3, 3, 2, 2, 2, 2, 2],
    128: [10, 8, 8, 6, 6, 5, 5, 5, 5, 4, 4, 4],
    256: [19, 15, 13, 12, 11, 11, 10, 10, 10, 9, 9, 8],
}

RATIOS = {
    64: [4.82, 3.85, 3.21, 3.06, 2.88, 2.75, 2.64, 2.50, 2.41, 2.32, 2.21, 2.14],
    128: [9.63, 7.71, 6.42, 6.12, 5.75, 5.50, 5.28, 5.00, 4.82, 4.64, 4.43, 4.28],
    256: [19.27, 15.41, 12.84, 12.23, 11.50, 11.01, 10.56, 10.01, 9.63, 9.28, 8.86, 8.56],
}

# Full-index memory for 10^9 codes, in GiB: (b, m) -> value.
INDEX_MEMORY_GIB = {(64, 2): 28, (128, 4): 57, (256, 8): 113}
