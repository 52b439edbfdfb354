//! Small dense-free linear algebra kernels used by the mode solvers: a
//! symmetric tridiagonal eigensolver (Sturm bisection plus inverse iteration)
//! and a banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th largest eigenvalue (0-based), bisected to machine precision.
    pub fn eigenvalue_from_top(&self, k: usize) -> f64 {
        let n = self.len();
        assert!(k < n);
        let target = n - k; // want count_below(x) == target - 1 on the left edge
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs() + hi.abs() + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues inside `(lo, hi)`, largest first.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.len();
        let above_lo = n - self.count_below(lo);
        let above_hi = n - self.count_below(hi);
        (above_hi..above_lo)
            .map(|k| self.eigenvalue_from_top(k))
            .filter(|&l| l > lo && l < hi)
            .collect()
    }

    /// Unit eigenvector for a converged eigenvalue by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1e-300);
        let shift = lambda + 1e-13 * scale;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        normalize(&mut v);
        for _ in 0..4 {
            v = self.solve_shifted(shift, &v);
            normalize(&mut v);
        }
        // Fix the sign so the largest component is positive.
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    /// Solves `(T - shift I) x = b` by Gaussian elimination with partial
    /// pivoting on the tridiagonal band.
    fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            let d = self.diag[0] - shift;
            let d = if d == 0.0 { f64::EPSILON } else { d };
            return vec![b[0] / d];
        }
        // Row i holds columns i, i+1, i+2 after pivoting.
        let mut a = vec![[0.0f64; 3]; n];
        let mut sub = vec![0.0f64; n];
        let mut rhs = b.to_vec();
        for i in 0..n {
            a[i][0] = self.diag[i] - shift;
            if i + 1 < n {
                a[i][1] = self.off[i];
                sub[i + 1] = self.off[i];
            }
        }
        let tiny = 1e-300;
        for i in 0..n - 1 {
            // Candidate pivot rows: i (entry a[i][0]) and i+1 (entry sub[i+1]).
            if sub[i + 1].abs() > a[i][0].abs() {
                let next = [sub[i + 1], a[i + 1][0], a[i + 1][1]];
                let cur = a[i];
                a[i] = next;
                a[i + 1] = [cur[1], cur[2], 0.0];
                sub[i + 1] = cur[0];
                rhs.swap(i, i + 1);
            } else {
                let cur_sub = sub[i + 1];
                sub[i + 1] = a[i + 1][0];
                a[i + 1] = [a[i + 1][0], a[i + 1][1], 0.0];
                // Row i+1 now reads [sub, a0, a1] relative to column i.
                let row = [cur_sub, a[i + 1][0], a[i + 1][1]];
                a[i + 1] = [row[1], row[2], 0.0];
                sub[i + 1] = row[0];
            }
            let piv = if a[i][0].abs() < tiny { tiny } else { a[i][0] };
            let m = sub[i + 1] / piv;
            a[i + 1][0] -= m * a[i][1];
            a[i + 1][1] -= m * a[i][2];
            rhs[i + 1] -= m * rhs[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= a[i][1] * x[i + 1];
            }
            if i + 2 < n {
                s -= a[i][2] * x[i + 2];
            }
            let piv = if a[i][0].abs() < tiny { tiny } else { a[i][0] };
            x[i] = s / piv;
        }
        x
    }
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square banded matrix with `bw` sub- and super-diagonals.
///
/// Row `r` stores columns `r - bw ..= r + 2 bw`; the extra `bw` columns on
/// the right receive fill-in from row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let width = 3 * bw + 1;
        Self {
            n,
            bw,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.bw >= r && c <= r + 2 * self.bw);
        r * self.width + (c + self.bw - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.bw >= r && c <= r + self.bw, "entry ({r},{c}) outside band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.bw < r || c > r + 2 * self.bw || c >= self.n {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// `y = A x` using the original (unfactored) band.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let c0 = r.saturating_sub(self.bw);
            let c1 = (r + self.bw).min(self.n - 1);
            let base = r * self.width + self.bw - r;
            y[r] = (c0..=c1).map(|c| self.data[base + c] * x[c]).sum();
        }
        y
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let bw = self.bw;
        let w = self.width;
        let mut piv = vec![0usize; n];
        let mut lower = vec![0.0f64; n * bw];
        for k in 0..n {
            let last_row = (k + bw).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::EigenNonConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
            piv[k] = p;
            let col_end = (k + 2 * bw).min(n - 1);
            if p != k {
                for c in k..=col_end {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            let krow = k * w + bw - k;
            let ncols = col_end - k;
            for r in k + 1..=last_row {
                let rs = self.slot(r, k);
                let m = self.data[rs] / pivot;
                lower[k * bw + (r - k - 1)] = m;
                self.data[rs] = 0.0;
                if m != 0.0 {
                    let rrow = r * w + bw - r;
                    // Rows are disjoint: row k ends before row r starts.
                    let (head, tail) = self.data.split_at_mut(rrow + k + 1);
                    let src = &head[krow + k + 1..krow + k + 1 + ncols];
                    let dst = &mut tail[..ncols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= m * s;
                    }
                }
            }
        }
        Ok(BandLu {
            upper: self,
            lower,
            piv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    upper: BandMatrix,
    lower: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let u = &self.upper;
        let (n, bw, w) = (u.n, u.bw, u.width);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                let last_row = (k + bw).min(n - 1);
                for r in k + 1..=last_row {
                    x[r] -= self.lower[k * bw + (r - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = k * w + bw - k;
            let col_end = (k + 2 * bw).min(n - 1);
            let coeffs = &u.data[row + k + 1..row + col_end + 1];
            let s: f64 = coeffs.iter().zip(&x[k + 1..=col_end]).map(|(a, b)| a * b).sum();
            x[k] = (x[k] - s) / u.data[row + k];
        }
        x
    }

    /// Solves for `p` right-hand sides at once. `x` is row-major `n x p`
    /// (the `p` values of one unknown are contiguous) and is overwritten.
    pub fn solve_block(&self, x: &mut [f64], p: usize) {
        let u = &self.upper;
        let (n, bw, w) = (u.n, u.bw, u.width);
        assert_eq!(x.len(), n * p);
        for k in 0..n {
            let piv = self.piv[k];
            if piv != k {
                let (a, b) = x.split_at_mut(piv * p);
                a[k * p..(k + 1) * p].swap_with_slice(&mut b[..p]);
            }
            let last_row = (k + bw).min(n - 1);
            let (head, tail) = x.split_at_mut((k + 1) * p);
            let xk = &head[k * p..];
            for r in k + 1..=last_row {
                let m = self.lower[k * bw + (r - k - 1)];
                if m != 0.0 {
                    let xr = &mut tail[(r - k - 1) * p..(r - k) * p];
                    for (a, b) in xr.iter_mut().zip(xk) {
                        *a -= m * b;
                    }
                }
            }
        }
        let mut acc = vec![0.0; p];
        for k in (0..n).rev() {
            let row = k * w + bw - k;
            let col_end = (k + 2 * bw).min(n - 1);
            acc.copy_from_slice(&x[k * p..(k + 1) * p]);
            for c in k + 1..=col_end {
                let a = u.data[row + c];
                if a != 0.0 {
                    for (s, v) in acc.iter_mut().zip(&x[c * p..(c + 1) * p]) {
                        *s -= a * v;
                    }
                }
            }
            let d = u.data[row + k];
            for (dst, s) in x[k * p..(k + 1) * p].iter_mut().zip(&acc) {
                *dst = s / d;
            }
        }
    }
}
