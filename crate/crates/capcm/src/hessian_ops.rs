//! Elementary symmetric function algebra for small symmetric matrices.
//!
//! `sigma_k` and its derivative (the Newton tensor) are computed from the
//! characteristic-polynomial trace recursion rather than an eigendecomposition,
//! so they stay smooth through eigenvalue crossings — the Jacobian assembly
//! differentiates through these values. Eigenvalues, where needed (convexity
//! monitoring), come from a cyclic Jacobi sweep.

use crate::domain::{ScalarField, SymTensorField};
use crate::error::{CapcmError, Result};
use crate::par;

/// Maximum hypersurface dimension handled by the fixed-size kernels.
pub const MAX_N: usize = 8;

/// Stack-allocated symmetric matrix of size `n <= MAX_N`.
#[derive(Debug, Clone, Copy)]
pub struct SmallSymMat {
    pub n: usize,
    pub a: [[f64; MAX_N]; MAX_N],
}

impl SmallSymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_N);
        SmallSymMat {
            n,
            a: [[0.0; MAX_N]; MAX_N],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diag(vals: &[f64]) -> Self {
        let mut m = Self::zeros(vals.len());
        for (i, v) in vals.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    /// 2x2 symmetric matrix [[a, b], [b, c]].
    pub fn sym2(a: f64, b: f64, c: f64) -> Self {
        let mut m = Self::zeros(2);
        m.a[0][0] = a;
        m.a[0][1] = b;
        m.a[1][0] = b;
        m.a[1][1] = c;
        m
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn add_diag(&mut self, v: f64) {
        for i in 0..self.n {
            self.a[i][i] += v;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += self.a[i][l] * other.a[l][j];
                }
                out.a[i][j] = acc;
            }
        }
        out
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.a[i][j] * other.a[i][j];
            }
        }
        acc
    }

    pub fn scaled_add(&mut self, c: f64, other: &Self) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] += c * other.a[i][j];
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> [f64; MAX_N] {
        let n = self.n;
        let mut a = self.a;
        for _sweep in 0..40 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[i][j] * a[i][j];
                }
            }
            let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
            if off <= 1e-30 * (scale + 1e-300) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for i in 0..n {
                        let aip = a[i][p];
                        let aiq = a[i][q];
                        a[i][p] = c * aip - s * aiq;
                        a[i][q] = s * aip + c * aiq;
                    }
                    for i in 0..n {
                        let api = a[p][i];
                        let aqi = a[q][i];
                        a[p][i] = c * api - s * aqi;
                        a[q][i] = s * api + c * aqi;
                    }
                }
            }
        }
        let mut ev = [0.0; MAX_N];
        for i in 0..n {
            ev[i] = a[i][i];
        }
        ev[..n].sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0f64;
    for i in 0..k {
        num = num * (n - i) as f64 / (i + 1) as f64;
    }
    num
}

/// All elementary symmetric functions `sigma_0..sigma_n` of the eigenvalues,
/// from the Faddeev-LeVerrier trace recursion (no eigendecomposition).
pub fn sigma_all(m: &SmallSymMat) -> [f64; MAX_N + 1] {
    let n = m.n;
    let mut out = [0.0; MAX_N + 1];
    out[0] = 1.0;
    let mut nj = SmallSymMat::identity(n); // N_0
    for j in 1..=n {
        let mn = m.mul(&nj);
        let e = mn.trace() / j as f64;
        out[j] = e;
        if j < n {
            let mut next = SmallSymMat::zeros(n);
            next.add_diag(e);
            next.scaled_add(-1.0, &mn);
            nj = next;
        }
    }
    out
}

/// `sigma_k` of the eigenvalues of `m`.
pub fn sigma_k(m: &SmallSymMat, k: usize) -> Result<f64> {
    check_k(m.n, k)?;
    Ok(sigma_all(m)[k])
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(CapcmError::InvalidParameter(format!(
            "k = {k} out of range for n = {n}"
        )));
    }
    Ok(())
}

/// Newton tensor `d sigma_k / d M`: for diagonal input, entry `i` is
/// `sigma_{k-1}` of the remaining eigenvalues.
pub fn newton_tensor(m: &SmallSymMat, k: usize) -> Result<SmallSymMat> {
    check_k(m.n, k)?;
    let n = m.n;
    let mut nj = SmallSymMat::identity(n); // N_0 = d sigma_1 / dM
    for j in 1..k {
        let mn = m.mul(&nj);
        let e = mn.trace() / j as f64;
        let mut next = SmallSymMat::zeros(n);
        next.add_diag(e);
        next.scaled_add(-1.0, &mn);
        nj = next;
    }
    Ok(nj)
}

/// Value, derivative and smallest eigenvalue of `sigma_k` at `m`.
#[derive(Debug, Clone, Copy)]
pub struct SigmaEval {
    pub value: f64,
    pub newton_tensor: SmallSymMat,
    pub lambda_min: f64,
}

impl SigmaEval {
    pub fn eval(m: &SmallSymMat, k: usize) -> Result<Self> {
        check_k(m.n, k)?;
        let nt = newton_tensor(m, k)?;
        // sigma_k = tr(M N_{k-1}) / k  (one extra recursion step)
        let value = m.mul(&nt).trace() / k as f64;
        Ok(SigmaEval {
            value,
            newton_tensor: nt,
            lambda_min: m.lambda_min(),
        })
    }
}

/// Garding cone membership: `sigma_1(M) > 0, ..., sigma_k(M) > 0`.
pub fn in_gamma_k(m: &SmallSymMat, k: usize) -> bool {
    if k < 1 || k > m.n {
        return false;
    }
    let s = sigma_all(m);
    (1..=k).all(|j| s[j] > 0.0)
}

/// Per-node smallest eigenvalue of a tensor field.
pub fn lambda_min_field(t: &SymTensorField) -> ScalarField {
    let vals = par::map_indexed(t.mats.len(), |p| t.mats[p].lambda_min());
    ScalarField::from_values(t.domain.clone(), vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_values_on_frozen_matrices() {
        let m = SmallSymMat::diag(&[1.0, 2.0, 3.0]);
        assert!((sigma_k(&m, 1).unwrap() - 6.0).abs() < 1e-14);
        assert!((sigma_k(&m, 2).unwrap() - 11.0).abs() < 1e-13);
        assert!((sigma_k(&m, 3).unwrap() - 6.0).abs() < 1e-13);
        for n in 2..=5 {
            let id = SmallSymMat::identity(n);
            for k in 1..=n {
                assert!(
                    (sigma_k(&id, k).unwrap() - binom(n, k)).abs() < 1e-12,
                    "identity n={n} k={k}"
                );
            }
        }
        assert!(sigma_k(&m, 4).is_err());
        assert!(sigma_k(&m, 0).is_err());
    }

    #[test]
    fn newton_tensor_on_frozen_matrices() {
        let m = SmallSymMat::diag(&[1.0, 2.0, 3.0]);
        let t2 = newton_tensor(&m, 2).unwrap();
        let expect2 = [5.0, 4.0, 3.0];
        let t3 = newton_tensor(&m, 3).unwrap();
        let expect3 = [6.0, 3.0, 2.0];
        for i in 0..3 {
            assert!((t2.a[i][i] - expect2[i]).abs() < 1e-13);
            assert!((t3.a[i][i] - expect3[i]).abs() < 1e-13);
        }
        let id = SmallSymMat::identity(4);
        let t1 = newton_tensor(&id, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((t1.a[i][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gamma_cone_membership() {
        assert!(in_gamma_k(&SmallSymMat::identity(3), 3));
        assert!(!in_gamma_k(&SmallSymMat::diag(&[-1.0, 3.0]), 2)); // sigma_2 = -3
        assert!(in_gamma_k(&SmallSymMat::diag(&[0.0, 1.0, 1.0]), 2)); // sigma_1=2, sigma_2=1
        assert!(!in_gamma_k(&SmallSymMat::diag(&[0.0, 1.0, 1.0]), 3)); // sigma_3 = 0
    }

    #[test]
    fn eigenvalues_match_known_spectra() {
        let m = SmallSymMat::sym2(2.0, 1.0, 2.0);
        let ev = m.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        // eigen route reproduces the char-poly route
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(2..=6);
            let mut m = SmallSymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    m.set_sym(i, j, rng.gen_range(-2.0..2.0));
                }
            }
            let ev = m.eigenvalues();
            let s = sigma_all(&m);
            // sigma_1 and sigma_n from eigenvalues
            let sum: f64 = ev[..n].iter().sum();
            let prod: f64 = ev[..n].iter().product();
            let scale: f64 = ev[..n].iter().map(|v| v.abs()).sum::<f64>() + 1.0;
            assert!((sum - s[1]).abs() < 1e-10 * scale);
            assert!((prod - s[n]).abs() < 1e-9 * scale.powi(n as i32));
        }
    }

    /// Gradient check: the Newton tensor matches central differences of
    /// sigma_k entry by entry.
    #[test]
    fn newton_tensor_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 2 + trial % 4;
            let mut m = SmallSymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    m.set_sym(i, j, rng.gen_range(-1.5..1.5));
                }
            }
            for k in 1..=n {
                let t = newton_tensor(&m, k).unwrap();
                let eps = 1e-6;
                for i in 0..n {
                    for j in 0..n {
                        let mut mp = m;
                        let mut mm = m;
                        // perturb the (i, j) entry alone: the derivative is
                        // taken treating all n^2 entries as independent
                        mp.a[i][j] += eps;
                        mm.a[i][j] -= eps;
                        let fd = (sigma_all(&mp)[k] - sigma_all(&mm)[k]) / (2.0 * eps);
                        let scale = 1.0 + t.dot(&t).sqrt();
                        assert!(
                            (fd - t.a[i][j]).abs() <= 1e-6 * scale,
                            "n={n} k={k} ({i},{j}): fd={fd} vs {}",
                            t.a[i][j]
                        );
                    }
                }
            }
        }
    }

    /// Newton-Maclaurin: (sigma_k / C(n,k))^{1/k} is non-increasing in k on
    /// the positive cone.
    #[test]
    fn newton_maclaurin_on_positive_definite_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.gen_range(2..=6);
            let m = random_posdef(n, &mut rng);
            let s = sigma_all(&m);
            for k in 2..=n {
                let a = (s[k] / binom(n, k)).powf(1.0 / k as f64);
                let b = (s[k - 1] / binom(n, k - 1)).powf(1.0 / (k - 1) as f64);
                assert!(a <= b * (1.0 + 1e-12), "k={k}: {a} > {b}");
            }
        }
    }

    /// Concavity of F = sigma_k^{1/k} along segments in the cone: the
    /// midpoint value dominates the chord.
    #[test]
    fn sigma_root_concavity_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(2..=5);
            let k = rng.gen_range(1..=n);
            let a = random_posdef(n, &mut rng);
            let b = random_posdef(n, &mut rng);
            let mut mid = a;
            mid.scaled_add(1.0, &b);
            for i in 0..n {
                for j in 0..n {
                    mid.a[i][j] *= 0.5;
                }
            }
            let f = |m: &SmallSymMat| sigma_all(m)[k].powf(1.0 / k as f64);
            assert!(f(&mid) >= 0.5 * (f(&a) + f(&b)) - 1e-12);
        }
    }

    fn random_posdef(n: usize, rng: &mut ChaCha8Rng) -> SmallSymMat {
        let mut b = SmallSymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b.a[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
        // B^T B + eps I
        let mut m = SmallSymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += b.a[l][i] * b.a[l][j];
                }
                m.a[i][j] = acc;
            }
            m.a[i][i] += 0.05;
        }
        m
    }

    proptest! {
        /// Euler identity: <dsigma_k/dM, M> = k sigma_k(M).
        #[test]
        fn euler_identity(seed in 0u64..500, n in 2usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = SmallSymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    m.set_sym(i, j, rng.gen_range(-3.0..3.0));
                }
            }
            let s = sigma_all(&m);
            for k in 1..=n {
                let t = newton_tensor(&m, k).unwrap();
                let lhs = t.dot(&m);
                let rhs = k as f64 * s[k];
                let scale = m.dot(&m).sqrt().powi(k as i32) + 1.0;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "k={}: {} vs {}", k, lhs, rhs);
            }
        }
    }
}
