/// Binary indexed tree over nonnegative `f64` weights with prefix search.
#[derive(Debug, Clone, Default)]
pub struct FenwickTree {
    tree: Vec<f64>,
    values: Vec<f64>,
    top: usize,
}

impl FenwickTree {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                let carry = tree[i + 1];
                tree[parent] += carry;
            }
        }
        let top = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        FenwickTree {
            tree,
            values: values.to_vec(),
            top,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        let delta = v - self.values[i];
        if delta == 0.0 {
            return;
        }
        self.values[i] = v;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Sum of `values[0..=i]`.
    pub fn prefix(&self, i: usize) -> f64 {
        let mut k = i + 1;
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    pub fn total(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.prefix(self.len() - 1)
        }
    }

    /// Smallest `i` with `prefix(i) > x`, clamped to the last index.
    #[inline]
    pub fn search(&self, mut x: f64) -> usize {
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= x {
                x -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(self.len().saturating_sub(1))
    }

    /// Recomputes the internal sums from the stored values.
    pub fn rebuild(&mut self) {
        *self = Self::from_values(&self.values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn prefix_and_search_agree_with_scan(
            values in prop::collection::vec(0u8..5, 1..200),
            updates in prop::collection::vec((0usize..200, 0u8..5), 0..50),
            probe in 0.0f64..1.0,
        ) {
            let mut vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let mut tree = FenwickTree::from_values(&vals);
            for (i, v) in updates {
                let i = i % vals.len();
                vals[i] = v as f64;
                tree.set(i, v as f64);
            }
            let mut acc = 0.0;
            for (i, v) in vals.iter().enumerate() {
                acc += v;
                prop_assert_eq!(tree.prefix(i), acc);
            }
            if acc > 0.0 {
                let x = probe * acc;
                let mut run = 0.0;
                let expect = vals.iter().position(|v| { run += v; run > x }).unwrap();
                prop_assert_eq!(tree.search(x), expect);
            }
        }
    }
}
