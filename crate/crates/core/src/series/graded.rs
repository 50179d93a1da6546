//! Dense storage of multivariate coefficients graded by total degree.
//!
//! A monomial `k` of degree `d` is identified with its prefix sums
//! `s_i = k_1 + … + k_i`, `0 ≤ s_1 ≤ … ≤ s_{n−1} ≤ d`. These are ordered
//! colexicographically (`s_{n−1}` slowest, `s_1` fastest), which gives the
//! rank `Σ_i C(s_i + i − 1, i)`.

#[derive(Clone, Debug)]
pub(crate) struct Graded {
    n: usize,
    /// `bin[i * width + c] = C(c, i)` for `1 ≤ i < n`.
    bin: Vec<usize>,
    width: usize,
    /// `prefix[mask * n + i] = |mask ∩ {0, …, i}|`.
    prefix: Vec<u32>,
}

impl Graded {
    pub(crate) fn new(n: usize, max_degree: usize) -> Self {
        let width = max_degree + n + 1;
        let mut bin = vec![0usize; n.max(1) * width];
        for i in 1..n {
            for c in 0..width {
                bin[i * width + c] = binomial(c, i);
            }
        }
        let mut prefix = vec![0u32; (1usize << n) * n];
        for mask in 0..1usize << n {
            let mut acc = 0;
            for i in 0..n {
                acc += (mask >> i & 1) as u32;
                prefix[mask * n + i] = acc;
            }
        }
        Graded { n, bin, width, prefix }
    }

    fn ensure(&mut self, degree: usize) {
        if degree + self.n + 1 > self.width {
            *self = Graded::new(self.n, 2 * degree + 8);
        }
    }

    /// Monomials of degree `d` in all variables, `C(d + n − 1, n − 1)`.
    pub(crate) fn count(&mut self, d: usize) -> usize {
        self.ensure(d);
        binomial(d + self.n - 1, self.n - 1)
    }

    /// Rank of the monomial with prefix sums `s` (length `n − 1`).
    #[inline]
    pub(crate) fn rank_prefix(&self, s: &[u32]) -> usize {
        let mut r = 0;
        for (idx, &si) in s.iter().enumerate() {
            let i = idx + 1;
            r += self.bin[i * self.width + si as usize + i - 1];
        }
        r
    }

    /// Rank of `k − 1_M` given the prefix sums of `k`; `M ⊆ supp(k)` is the caller's job.
    #[inline]
    pub(crate) fn rank_minus(&self, s: &[u32], mask: usize) -> usize {
        let pre = &self.prefix[mask * self.n..];
        let mut r = 0;
        for (idx, &si) in s.iter().enumerate() {
            let i = idx + 1;
            r += self.bin[i * self.width + (si - pre[idx]) as usize + i - 1];
        }
        r
    }

    pub(crate) fn rank(&self, k: &[u32]) -> usize {
        let mut s = Vec::with_capacity(self.n.saturating_sub(1));
        let mut acc = 0;
        for &ki in &k[..self.n - 1] {
            acc += ki;
            s.push(acc);
        }
        self.rank_prefix(&s)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Odometer over the monomials of one degree, in rank order.
pub(crate) struct MonomialIter {
    d: u32,
    s: Vec<u32>,
    k: Vec<u32>,
    started: bool,
    done: bool,
}

impl MonomialIter {
    pub(crate) fn new(n: usize, d: usize) -> Self {
        let mut k = vec![0u32; n];
        if n > 0 {
            k[n - 1] = d as u32;
        }
        MonomialIter {
            d: d as u32,
            s: vec![0; n.saturating_sub(1)],
            k,
            started: false,
            done: n == 0,
        }
    }

    /// Prefix sums of the current monomial.
    pub(crate) fn prefix(&self) -> &[u32] {
        &self.s
    }

    /// Advances and returns the current exponent vector.
    pub(crate) fn next_monomial(&mut self) -> Option<&[u32]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.k);
        }
        let m = self.s.len();
        let mut i = 0;
        loop {
            if i == m {
                self.done = true;
                return None;
            }
            let upper = if i + 1 < m { self.s[i + 1] } else { self.d };
            if self.s[i] < upper {
                self.s[i] += 1;
                for v in &mut self.s[..i] {
                    *v = 0;
                }
                break;
            }
            i += 1;
        }
        let mut prev = 0;
        for (j, &sj) in self.s.iter().enumerate() {
            self.k[j] = sj - prev;
            prev = sj;
        }
        self.k[m] = self.d - prev;
        Some(&self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_matches_rank_and_count() {
        for n in 1..=5 {
            let mut g = Graded::new(n, 10);
            for d in 0..=10 {
                let mut it = MonomialIter::new(n, d);
                let mut seen = 0;
                while let Some(k) = it.next_monomial() {
                    let k = k.to_vec();
                    assert_eq!(k.iter().sum::<u32>() as usize, d);
                    assert_eq!(g.rank(&k), seen, "n {n} d {d} k {k:?}");
                    assert_eq!(g.rank_prefix(it.prefix()), seen);
                    seen += 1;
                }
                assert_eq!(seen, g.count(d));
            }
        }
    }

    #[test]
    fn rank_minus_matches_direct_rank() {
        let n = 4;
        let g = Graded::new(n, 12);
        let mut it = MonomialIter::new(n, 9);
        while let Some(k) = it.next_monomial() {
            let k = k.to_vec();
            let supp: usize = (0..n).filter(|&i| k[i] > 0).map(|i| 1 << i).sum();
            let mut sub = supp;
            while sub != 0 {
                let reduced: Vec<u32> = (0..n).map(|i| k[i] - (sub >> i & 1) as u32).collect();
                assert_eq!(g.rank_minus(it.prefix(), sub), g.rank(&reduced));
                sub = (sub - 1) & supp;
            }
        }
    }

    #[test]
    fn counts_grow_on_demand() {
        let mut g = Graded::new(3, 2);
        // C(50 + 2, 2)
        assert_eq!(g.count(50), 1326);
    }
}
