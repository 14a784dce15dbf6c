//! Self-contained linear algebra: banded LU with partial pivoting, a
//! bordered solver for "banded + scattered entries + dense constraint
//! columns" systems, a small dense LU, and Gauss-Legendre rules.
//!
//! The Jacobians in this crate are banded under angle-major node ordering
//! except for a handful of structurally long-range couplings: the periodic
//! angular wrap, the parity ghosts across the pole, and the kernel
//! constraint columns. Those are folded in through a low-rank correction:
//! with `A = B + U V^T` (`B` banded, `V` column selectors) and constraint
//! columns `Z`, the system
//!
//! ```text
//! [A  Z] [x]   [f]
//! [Z^T 0] [l] = [g]
//! ```
//!
//! is reduced to a dense solve of size `rank(U) + ncols(Z)` after the
//! banded factorization of `B`. One step of iterative refinement against
//! the exact sparse rows keeps the result accurate when `B` is much better
//! conditioned than the reduction path.

use crate::error::{CapcmError, Result};
#[cfg(feature = "parallel")]
use crate::par;

/// Sparse matrix in row-major assembled form. Column indices within a row
/// are sorted and unique.
#[derive(Debug, Clone)]
pub struct SparseRows {
    pub n: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl SparseRows {
    pub fn new(n: usize) -> Self {
        SparseRows {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Accumulate `v` at `(r, c)`, merging duplicates.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&(c as u32), |e| e.0) {
            Ok(pos) => row[pos].1 += v,
            Err(pos) => row.insert(pos, (c as u32, v)),
        }
    }

    /// y = A x with exact products (FMA) and compensated accumulation:
    /// rows near the pole carry O(1/(h dphi)^2) entries whose products
    /// cancel almost exactly, and iterative refinement needs the residual
    /// at the round-off of the result, not of the partials.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0f64;
            let mut comp = 0.0f64;
            for &(c, v) in row {
                let xv = x[c as usize];
                let t = v * xv;
                comp += v.mul_add(xv, -t);
                let sum = acc + t;
                comp += if acc.abs() >= t.abs() {
                    (acc - sum) + t
                } else {
                    (t - sum) + acc
                };
                acc = sum;
            }
            y[r] = acc + comp;
        }
    }

    /// Dense copy, for small-instance reference solves in tests.
    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.n, self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                *d.at_mut(r, c as usize) += v;
            }
        }
        d
    }
}

/// Dense row-major matrix. Only what the crate needs.
#[derive(Debug, Clone)]
pub struct DenseMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let row = &self.data[r * self.ncols..(r + 1) * self.ncols];
            y[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(m: &DenseMat) -> Result<Self> {
        assert_eq!(m.nrows, m.ncols);
        let n = m.nrows;
        let mut lu = m.data.clone();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for r in k + 1..n {
                let v = lu[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < f64::MIN_POSITIVE {
                return Err(CapcmError::LinearSolve(format!(
                    "dense LU: zero pivot at column {k}"
                )));
            }
            piv[k] = p;
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let ukk = lu[k * n + k];
            for r in k + 1..n {
                let m = lu[r * n + k] / ukk;
                lu[r * n + k] = m;
                if m != 0.0 {
                    for c in k + 1..n {
                        lu[r * n + c] -= m * lu[k * n + c];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        // multipliers live at their final (post-swap) positions, so all row
        // interchanges are applied to the right-hand side up front
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..n {
                    x[r] -= self.lu[r * n + k] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for c in k + 1..n {
                acc -= self.lu[k * n + c] * x[c];
            }
            x[k] = acc / self.lu[k * n + k];
        }
        x
    }
}

/// Banded LU with partial pivoting. Row `r` holds columns
/// `[r - kl, r + kl + ku]`; the extra `kl` on the upper side absorbs
/// pivoting fill.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<Vec<f64>>,
    ipiv: Vec<u32>,
    mults: Vec<f64>,
    factored: bool,
}

impl BandLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandLu {
            n,
            kl,
            ku,
            width,
            rows: vec![vec![0.0; width]; n],
            ipiv: vec![0; n],
            mults: vec![0.0; n * kl],
            factored: false,
        }
    }

    #[inline]
    fn col_index(&self, r: usize, c: usize) -> usize {
        // caller guarantees r - kl <= c <= r + kl + ku
        c + self.kl - r
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let idx = self.col_index(r, c);
        self.rows[r][idx] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let idx = self.col_index(r, c);
        self.rows[r][idx] += v;
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let rmax = (k + kl).min(n - 1);
            // pivot search in column k
            let mut p = k;
            let mut best = self.rows[k][self.col_index(k, k)].abs();
            for r in k + 1..=rmax {
                let v = self.rows[r][self.col_index(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-280 {
                return Err(CapcmError::LinearSolve(format!(
                    "banded LU: zero pivot at column {k}"
                )));
            }
            self.ipiv[k] = p as u32;
            if p != k {
                // swap rows k and p over columns [k, k + kl + ku], realigning
                // each row to its own window
                let hi = (k + kl + ku).min(n - 1);
                for c in k..=hi {
                    let ik = self.col_index(k, c);
                    let ip = self.col_index(p, c);
                    let tmp = self.rows[k][ik];
                    self.rows[k][ik] = self.rows[p][ip];
                    self.rows[p][ip] = tmp;
                }
            }
            let ukk = self.rows[k][self.col_index(k, k)];
            let tail = self.width - kl - 1; // entries in columns k+1 ..= k+kl+ku
            let tail_len = tail.min(n - 1 - k);
            for d in 1..=kl.min(n - 1 - k) {
                let r = k + d;
                let a = self.rows[r][self.col_index(r, k)];
                let m = a / ukk;
                self.mults[k * kl + d - 1] = m;
                if m != 0.0 {
                    let (head, rest) = self.rows.split_at_mut(r);
                    let prow = &head[k];
                    let rrow = &mut rest[0];
                    let off_p = kl + 1; // col k+1 in row k
                    let off_r = kl + 1 - d; // col k+1 in row r
                    for t in 0..tail_len {
                        rrow[off_r + t] -= m * prow[off_p + t];
                    }
                }
                // entry below the diagonal is now logically zero
                let idx = self.col_index(r, k);
                self.rows[r][idx] = 0.0;
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert!(self.factored);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.ipiv[k] as usize;
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for d in 1..=kl.min(n - 1 - k) {
                    x[k + d] -= self.mults[k * kl + d - 1] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let hi = (k + kl + ku).min(n - 1);
            let mut acc = x[k];
            let row = &self.rows[k];
            for c in k + 1..=hi {
                acc -= row[c + kl - k] * x[c];
            }
            x[k] = acc / row[kl];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Block substitution: `chunk` right-hand sides sharing each pass, so
    /// the inner updates are contiguous vectorizable slices. Per column the
    /// arithmetic and its order match `solve_in_place` exactly.
    fn solve_block(&self, cols: &mut [Vec<f64>]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let b = cols.len();
        let mut x = vec![0.0f64; n * b];
        for (ci, col) in cols.iter().enumerate() {
            for r in 0..n {
                x[r * b + ci] = col[r];
            }
        }
        for k in 0..n {
            let p = self.ipiv[k] as usize;
            if p != k {
                for ci in 0..b {
                    x.swap(k * b + ci, p * b + ci);
                }
            }
            for d in 1..=kl.min(n - 1 - k) {
                let m = self.mults[k * kl + d - 1];
                if m != 0.0 {
                    let (head, tail) = x.split_at_mut((k + d) * b);
                    let src = &head[k * b..k * b + b];
                    let dst = &mut tail[..b];
                    for ci in 0..b {
                        dst[ci] -= m * src[ci];
                    }
                }
            }
        }
        for k in (0..n).rev() {
            let hi = (k + kl + ku).min(n - 1);
            let row = &self.rows[k];
            for c in k + 1..=hi {
                let u = row[c + kl - k];
                if u != 0.0 {
                    let (head, tail) = x.split_at_mut(c * b);
                    let dst = &mut head[k * b..k * b + b];
                    let src = &tail[..b];
                    for ci in 0..b {
                        dst[ci] -= u * src[ci];
                    }
                }
            }
            let diag = row[kl];
            for ci in 0..b {
                x[k * b + ci] /= diag;
            }
        }
        for (ci, col) in cols.iter_mut().enumerate() {
            for r in 0..n {
                col[r] = x[r * b + ci];
            }
        }
    }

    /// Independent solves for many right-hand sides.
    pub fn solve_multi(&self, rhs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let mut cols = rhs;
        if cols.len() == 1 {
            self.solve_in_place(&mut cols[0]);
            return cols;
        }
        const BLOCK: usize = 48;
        #[cfg(feature = "parallel")]
        {
            if par::is_parallel() {
                use rayon::prelude::*;
                cols.par_chunks_mut(BLOCK)
                    .for_each(|chunk| self.solve_block(chunk));
                return cols;
            }
        }
        for chunk in cols.chunks_mut(BLOCK) {
            self.solve_block(chunk);
        }
        cols
    }
}

/// Bordered solver for `A x + Z l = f`, `Z^T x = g` with `A` given as
/// assembled sparse rows that are banded up to scattered exceptions.
pub struct BorderedSolver {
    n: usize,
    rows: SparseRows,
    constraints: Vec<Vec<f64>>,
    irr_cols: Vec<u32>,
    band: BandLu,
    w: Vec<Vec<f64>>, // B^{-1} [U | Z]
    schur: Option<DenseLu>,
    refine_passes: usize,
}

impl BorderedSolver {
    /// `kl` is the half bandwidth kept in the banded core; entries of
    /// `rows` outside it become the low-rank correction. `constraints`
    /// are dense columns (each of length `n`).
    pub fn new(rows: SparseRows, kl: usize, constraints: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.n;
        let mut band = BandLu::new(n, kl, kl);
        // distinct columns hit by out-of-band entries
        let mut irr_cols: Vec<u32> = Vec::new();
        for (r, row) in rows.rows.iter().enumerate() {
            for &(c, _) in row {
                let c = c as usize;
                if c + kl < r || c > r + kl {
                    if let Err(pos) = irr_cols.binary_search(&(c as u32)) {
                        irr_cols.insert(pos, c as u32);
                    }
                }
            }
        }
        for (r, row) in rows.rows.iter().enumerate() {
            for &(c, v) in row {
                let c = c as usize;
                if c + kl >= r && c <= r + kl {
                    band.add(r, c, v);
                }
            }
        }
        band.factor()?;

        // U columns: for each irregular column c, the vector of out-of-band
        // entries in that column.
        let nirr = irr_cols.len();
        let mut u_cols: Vec<Vec<f64>> = vec![vec![0.0; n]; nirr];
        for (r, row) in rows.rows.iter().enumerate() {
            for &(c, v) in row {
                let cu = c as usize;
                if cu + kl < r || cu > r + kl {
                    let m = irr_cols.binary_search(&c).unwrap();
                    u_cols[m][r] += v;
                }
            }
        }
        let m = constraints.len();
        let mut all = u_cols;
        for z in &constraints {
            assert_eq!(z.len(), n);
            all.push(z.clone());
        }
        let w = band.solve_multi(all);

        let schur = if nirr + m > 0 {
            // dense block:
            // [ I + V^T W_U   V^T W_Z ]
            // [ Z^T W_U       Z^T W_Z ]
            let dim = nirr + m;
            let mut mat = DenseMat::zeros(dim, dim);
            for (col, wcol) in w.iter().enumerate() {
                for (row_i, &c) in irr_cols.iter().enumerate() {
                    *mat.at_mut(row_i, col) = wcol[c as usize];
                }
                for (zi, z) in constraints.iter().enumerate() {
                    let dot: f64 = z.iter().zip(wcol).map(|(a, b)| a * b).sum();
                    *mat.at_mut(nirr + zi, col) = dot;
                }
            }
            for i in 0..nirr {
                *mat.at_mut(i, i) += 1.0;
            }
            Some(DenseLu::factor(&mat).map_err(|_| {
                CapcmError::LinearSolve(
                    "bordered reduction singular beyond the declared kernel".into(),
                )
            })?)
        } else {
            None
        };

        Ok(BorderedSolver {
            n,
            rows,
            constraints,
            irr_cols,
            band,
            w,
            schur,
            refine_passes: 2,
        })
    }

    pub fn multiplier_count(&self) -> usize {
        self.constraints.len()
    }

    fn solve_once(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nirr = self.irr_cols.len();
        let m = self.constraints.len();
        let mut x = self.band.solve(f);
        let mut lambda = vec![0.0; m];
        if let Some(schur) = &self.schur {
            let mut rhs = vec![0.0; nirr + m];
            for (i, &c) in self.irr_cols.iter().enumerate() {
                rhs[i] = x[c as usize];
            }
            for (zi, z) in self.constraints.iter().enumerate() {
                let dot: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
                rhs[nirr + zi] = dot - g[zi];
            }
            let yl = schur.solve(&rhs);
            for (col, wcol) in self.w.iter().enumerate() {
                let coef = yl[col];
                if coef != 0.0 {
                    for (xi, wv) in x.iter_mut().zip(wcol) {
                        *xi -= coef * wv;
                    }
                }
            }
            lambda.copy_from_slice(&yl[nirr..]);
        }
        (x, lambda)
    }

    /// Solve with iterative refinement against the exact assembled rows.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut lambda) = self.solve_once(f, g);
        let mut ax = vec![0.0; self.n];
        for _ in 0..self.refine_passes {
            self.rows.apply(&x, &mut ax);
            let mut rf = vec![0.0; self.n];
            for i in 0..self.n {
                let mut zl = 0.0;
                for (zi, z) in self.constraints.iter().enumerate() {
                    zl += z[i] * lambda[zi];
                }
                rf[i] = f[i] - ax[i] - zl;
            }
            let mut rg = vec![0.0; self.constraints.len()];
            for (zi, z) in self.constraints.iter().enumerate() {
                let dot: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
                rg[zi] = g[zi] - dot;
            }
            let (dx, dl) = self.solve_once(&rf, &rg);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            for (li, d) in lambda.iter_mut().zip(&dl) {
                *li += d;
            }
        }
        (x, lambda)
    }
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_m(x) and P_m'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 2..=m {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, rng: &mut ChaCha8Rng) -> SparseRows {
        let mut a = SparseRows::new(n);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + kl).min(n - 1) {
                a.add(r, c, rng.gen_range(-1.0..1.0));
            }
            a.add(r, r, 4.0 + kl as f64); // diagonally dominant
        }
        a
    }

    #[test]
    fn dense_lu_solves() {
        let mut m = DenseMat::zeros(3, 3);
        let vals = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        for r in 0..3 {
            for c in 0..3 {
                *m.at_mut(r, c) = vals[r][c];
            }
        }
        let lu = DenseLu::factor(&m).unwrap();
        let x = lu.solve(&[8.0, -11.0, -3.0]);
        let expect = [2.0, 3.0, -1.0];
        for i in 0..3 {
            assert!((x[i] - expect[i]).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn band_lu_matches_dense_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(n, kl) in &[(12usize, 1usize), (40, 3), (90, 7)] {
            let a = random_banded(n, kl, &mut rng);
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut band = BandLu::new(n, kl, kl);
            for (r, row) in a.rows.iter().enumerate() {
                for &(c, v) in row {
                    band.add(r, c as usize, v);
                }
            }
            band.factor().unwrap();
            let x = band.solve(&rhs);
            let dense = DenseLu::factor(&a.to_dense()).unwrap();
            let xd = dense.solve(&rhs);
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "n={n} kl={kl} i={i}");
            }
        }
    }

    #[test]
    fn band_lu_pivots_rows() {
        // first pivot is zero without row exchange
        let n = 4;
        let mut band = BandLu::new(n, 1, 1);
        let m = [
            [0.0, 2.0, 0.0, 0.0],
            [1.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 3.0, 1.0],
            [0.0, 0.0, 1.0, 2.0],
        ];
        for r in 0..n {
            for c in r.saturating_sub(1)..=(r + 1).min(n - 1) {
                band.set(r, c, m[r][c]);
            }
        }
        band.factor().unwrap();
        let rhs = [2.0, 3.0, 5.0, 3.0];
        let x = band.solve(&rhs);
        let mut d = DenseMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                *d.at_mut(r, c) = m[r][c];
            }
        }
        let xd = DenseLu::factor(&d).unwrap().solve(&rhs);
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
    }

    /// Small-instance oracle: embed the bordered system densely and compare.
    #[test]
    fn bordered_solver_matches_dense_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 30;
        let kl = 2;
        let mut a = random_banded(n, kl, &mut rng);
        // scatter some far entries (periodic-wrap-like)
        for r in 0..4 {
            a.add(r, n - 1 - r, 0.7);
            a.add(n - 1 - r, r, -0.4);
        }
        let z: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = vec![0.3, -0.1];

        let solver = BorderedSolver::new(a.clone(), kl, z.clone()).unwrap();
        let (x, lambda) = solver.solve(&f, &g);

        // dense embedding
        let dim = n + 2;
        let mut d = DenseMat::zeros(dim, dim);
        for (r, row) in a.rows.iter().enumerate() {
            for &(c, v) in row {
                *d.at_mut(r, c as usize) += v;
            }
        }
        for (zi, zc) in z.iter().enumerate() {
            for r in 0..n {
                *d.at_mut(r, n + zi) = zc[r];
                *d.at_mut(n + zi, r) = zc[r];
            }
        }
        let mut rhs = f.clone();
        rhs.extend_from_slice(&g);
        let xd = DenseLu::factor(&d).unwrap().solve(&rhs);
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9, "i={i}: {} vs {}", x[i], xd[i]);
        }
        for i in 0..2 {
            assert!((lambda[i] - xd[n + i]).abs() < 1e-9);
        }
    }

    /// The bordered path must stay accurate when the full matrix is
    /// singular on a known kernel removed by the constraints, with the
    /// kernel-breaking entries sitting outside the band (as the periodic
    /// wrap does in the real Jacobians).
    #[test]
    fn bordered_solver_handles_exactly_singular_matrix() {
        let n = 24;
        let kl = 1;
        // periodic graph Laplacian: kernel = constants; the wrap entries
        // are out of band, so the banded core is the (regular) open chain
        let mut a = SparseRows::new(n);
        for r in 0..n {
            a.add(r, (r + 1) % n, -1.0);
            a.add(r, (r + n - 1) % n, -1.0);
            a.add(r, r, 2.0);
        }
        let z = vec![vec![1.0; n]];
        let solver = BorderedSolver::new(a.clone(), kl, z.clone()).unwrap();
        // consistent rhs orthogonal to the (symmetric) kernel
        let f: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let (x, lambda) = solver.solve(&f, &[0.0]);
        // check A x + Z l = f and Z^T x = 0
        let mut ax = vec![0.0; n];
        a.apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] + lambda[0] - f[i]).abs() < 1e-10);
        }
        let s: f64 = x.iter().sum();
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn blocked_multi_rhs_matches_single_solves_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 120;
        let kl = 9;
        let a = random_banded(n, kl, &mut rng);
        let mut band = BandLu::new(n, kl, kl);
        for (r, row) in a.rows.iter().enumerate() {
            for &(c, v) in row {
                band.add(r, c as usize, v);
            }
        }
        band.factor().unwrap();
        let cols: Vec<Vec<f64>> = (0..130)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let multi = band.solve_multi(cols.clone());
        for (col, sol) in cols.iter().zip(&multi) {
            let single = band.solve(col);
            for i in 0..n {
                assert_eq!(single[i].to_bits(), sol[i].to_bits());
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
