//! Binary sum tree over nonnegative leaf weights.
//!
//! Internal nodes are always recomputed from their two children, so the tree
//! is a pure function of its leaves: two trees holding the same leaves hold
//! bit-identical sums regardless of update history.

#[derive(Debug, Clone)]
pub struct SumTree {
    n: usize,
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(n: usize) -> Self {
        let size = n.max(1).next_power_of_two();
        Self {
            n,
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut t = Self::new(weights.len());
        t.nodes[t.size..t.size + weights.len()].copy_from_slice(weights);
        t.rebuild();
        t
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn set(&mut self, i: usize, w: f64) {
        debug_assert!(i < self.n && w >= 0.0, "bad leaf {i} = {w}");
        let mut j = self.size + i;
        self.nodes[j] = w;
        while j > 1 {
            j >>= 1;
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
        }
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for j in (1..self.size).rev() {
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
        }
    }

    /// Canonical nodes covering `[lo, hi)`, left to right.
    fn cover(&self, lo: usize, hi: usize, out: &mut Vec<usize>) {
        out.clear();
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        let mut right = Vec::new();
        while l < r {
            if l & 1 == 1 {
                out.push(l);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                right.push(r);
            }
            l >>= 1;
            r >>= 1;
        }
        out.extend(right.into_iter().rev());
    }

    /// Sum of leaves in `[lo, hi)`.
    pub fn range_sum(&self, lo: usize, hi: usize) -> f64 {
        if lo == 0 && hi >= self.n {
            return self.total();
        }
        let mut nodes = Vec::new();
        self.cover(lo, hi, &mut nodes);
        nodes.iter().map(|&j| self.nodes[j]).sum()
    }

    /// Leaf index drawn with probability proportional to its weight, using a
    /// uniform `u` in `[0, 1)`. Returns `None` when the total is zero.
    pub fn sample(&self, u: f64) -> Option<usize> {
        let total = self.total();
        if total <= 0.0 {
            return None;
        }
        Some(self.descend(1, u * total))
    }

    /// As [`sample`](Self::sample), restricted to leaves in `[lo, hi)`.
    pub fn sample_in_range(&self, lo: usize, hi: usize, u: f64) -> Option<usize> {
        if lo == 0 && hi >= self.n {
            return self.sample(u);
        }
        let mut nodes = Vec::new();
        self.cover(lo, hi, &mut nodes);
        let total: f64 = nodes.iter().map(|&j| self.nodes[j]).sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = u * total;
        let last = *nodes.iter().rev().find(|&&j| self.nodes[j] > 0.0)?;
        for &j in &nodes {
            let w = self.nodes[j];
            if j == last || (w > 0.0 && target < w) {
                return Some(self.descend(j, target));
            }
            target -= w;
        }
        unreachable!("canonical cover exhausted")
    }

    fn descend(&self, mut j: usize, mut target: f64) -> usize {
        while j < self.size {
            let left = self.nodes[2 * j];
            if target < left || self.nodes[2 * j + 1] <= 0.0 {
                j *= 2;
            } else {
                target -= left;
                j = 2 * j + 1;
            }
        }
        j - self.size
    }
}
