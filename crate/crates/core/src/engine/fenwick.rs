//! Binary indexed tree over move rates: prefix sums and weighted selection
//! in `O(log n)`, point updates in `O(log n)`.

pub(crate) struct Fenwick {
    /// 1-indexed tree; `tree[i]` covers the range ending at `i` of length
    /// `lowbit(i)`.
    tree: Vec<f64>,
    n: usize,
    mask: usize,
}

impl Fenwick {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        // O(n) build: seed the leaves, then propagate each node into its parent
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let mut mask = 1usize;
        while (mask << 1) <= n {
            mask <<= 1;
        }
        Fenwick { tree, n, mask }
    }

    /// Add `delta` to position `i` (0-indexed).
    #[inline]
    pub fn add(&mut self, i: usize, delta: f64) {
        let mut j = i + 1;
        while j <= self.n {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    /// Sum of all values.
    pub fn total(&self) -> f64 {
        let mut sum = 0.0;
        let mut j = self.n;
        while j > 0 {
            sum += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        sum
    }

    /// Largest index `i` (0-indexed) such that the prefix sum through `i-1`
    /// is `<= u`; equivalently, the index selected by the weight `u` in
    /// cumulative order. `u` must lie in `[0, total)` for an in-range result;
    /// out-of-range weights clamp to the last index.
    #[inline]
    pub fn find(&self, mut u: f64) -> usize {
        let mut pos = 0usize;
        let mut step = self.mask;
        while step > 0 {
            let next = pos + step;
            if next <= self.n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(self.n - 1)
    }
}
