//! Hermitian eigensolvers: dense (nalgebra) and a thick-restart Lanczos for large sparse operators.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    /// y ← A x
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Compressed-row Hermitian matrix with both triangles stored.
#[derive(Clone, Debug, Default)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl CsrMatrix {
    /// Build from per-row (col, value) lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, C64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[p])] += self.vals[p];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

impl HermitianOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yi = s;
        }
    }
}

impl HermitianOperator for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = ZERO);
        for j in 0..n {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            let col = self.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }
}

/// Ascending eigenvalues, and eigenvectors as the columns of `vectors` when requested.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<C64>>,
}

fn sorted(values: Vec<f64>, vectors: Option<DMatrix<C64>>, keep: usize) -> Eigen {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx.truncate(keep);
    let vals = idx.iter().map(|&i| values[i]).collect();
    let vecs = vectors.map(|v| DMatrix::from_fn(v.nrows(), idx.len(), |r, c| v[(r, idx[c])]));
    Eigen { values: vals, vectors: vecs }
}

/// Full dense Hermitian eigendecomposition, ascending.
pub fn dense_eigh(m: DMatrix<C64>, vectors: bool) -> Result<Eigen> {
    let n = m.nrows();
    if !vectors {
        let e = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
            .ok_or_else(|| Error::NonConvergence("dense Hermitian eigensolver".into()))?;
        return Ok(sorted(e.eigenvalues.iter().copied().collect(), None, n));
    }
    let e = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::NonConvergence("dense Hermitian eigensolver".into()))?;
    Ok(sorted(e.eigenvalues.iter().copied().collect(), Some(e.eigenvectors), n))
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub nev: usize,
    /// Krylov subspace size; raised to at least 2·nev + 20.
    pub ncv: usize,
    /// Residual tolerance, relative to max(1, |θ|).
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl LanczosOptions {
    pub fn new(nev: usize) -> Self {
        LanczosOptions { nev, ncv: 0, tol: 1e-10, max_restarts: 2000, seed: 0x5eed }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |s, (x, y)| s + x.conj() * y)
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Two passes of classical Gram–Schmidt; returns accumulated coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut coeff = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let c: Vec<C64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, ci) in basis.iter().zip(&c) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= ci * vi;
            }
        }
        for (a, b) in coeff.iter_mut().zip(c) {
            *a += b;
        }
    }
    coeff
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[Vec<C64>]) -> Vec<C64> {
    loop {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        orthogonalize(against, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|z| *z /= nv);
            return v;
        }
    }
}

/// Lowest `nev` eigenpairs of a Hermitian operator by thick-restart Lanczos with full
/// reorthogonalisation. Started from a single seeded vector, so an exactly degenerate
/// eigenvalue may be reported with too low a multiplicity; use [`dense_eigh`] there.
pub fn lanczos_lowest<O: HermitianOperator + ?Sized>(op: &O, opts: &LanczosOptions, vectors: bool) -> Result<Eigen> {
    lanczos_lowest_from(op, opts, vectors, None)
}

/// As [`lanczos_lowest`], seeded with `start` (e.g. an interpolated coarse-grid eigenvector).
pub fn lanczos_lowest_from<O: HermitianOperator + ?Sized>(
    op: &O,
    opts: &LanczosOptions,
    vectors: bool,
    start: Option<&[C64]>,
) -> Result<Eigen> {
    let n = op.dim();
    let nev = opts.nev.min(n);
    let m = opts.ncv.max(2 * nev + 20);
    if m >= n {
        let mut dense = DMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            op.apply(&e, &mut col);
            e[j] = ZERO;
            for i in 0..n {
                dense[(i, j)] = col[i];
            }
        }
        let dense = (&dense + dense.adjoint()) * C64::new(0.5, 0.0);
        let full = dense_eigh(dense, vectors)?;
        return Ok(sorted(full.values, full.vectors, nev));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    match start {
        Some(v0) if v0.len() == n && norm(v0) > 0.0 => {
            let nv = norm(v0);
            basis.push(v0.iter().map(|z| z / nv).collect());
        }
        _ => basis.push(random_unit(n, &mut rng, &[])),
    }
    let mut h = DMatrix::<C64>::zeros(m, m);
    let mut k = 0usize;
    let mut w = vec![ZERO; n];

    for _ in 0..opts.max_restarts {
        let mut f = Vec::new();
        let mut beta_m = 0.0;
        for j in k..m {
            op.apply(&basis[j], &mut w);
            let c = orthogonalize(&basis, &mut w);
            for (i, ci) in c.into_iter().enumerate() {
                h[(i, j)] = ci;
            }
            let beta = norm(&w);
            if j + 1 < m {
                let scale = basis[j].iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
                if beta < 1e-13 * scale {
                    // invariant subspace: continue with a fresh direction
                    let v = random_unit(n, &mut rng, &basis);
                    basis.push(v);
                } else {
                    basis.push(w.iter().map(|z| z / beta).collect());
                }
            } else {
                beta_m = beta;
                f = w.clone();
            }
        }

        // Hermitian projection from the upper triangle
        let proj = DMatrix::from_fn(m, m, |i, j| {
            if i < j {
                h[(i, j)]
            } else if i == j {
                C64::new(h[(i, i)].re, 0.0)
            } else {
                h[(j, i)].conj()
            }
        });
        let ritz = dense_eigh(proj, true)?;
        let s = ritz.vectors.unwrap();
        let converged = (0..nev).all(|i| {
            let r = beta_m * s[(m - 1, i)].norm();
            r <= opts.tol * ritz.values[i].abs().max(1.0)
        });
        let keep = if converged { nev } else { (nev + (m - nev) / 2).min(m - 1) };
        let combine = |cols: usize| -> Vec<Vec<C64>> {
            (0..cols)
                .map(|c| {
                    let mut y = vec![ZERO; n];
                    for (j, v) in basis.iter().enumerate() {
                        let sj = s[(j, c)];
                        for (yi, vi) in y.iter_mut().zip(v) {
                            *yi += sj * vi;
                        }
                    }
                    y
                })
                .collect()
        };
        if converged {
            let values = ritz.values[..nev].to_vec();
            let vecs = if vectors {
                let ys = combine(nev);
                Some(DMatrix::from_fn(n, nev, |r, c| ys[c][r]))
            } else {
                None
            };
            return Ok(Eigen { values, vectors: vecs });
        }
        let mut ys = combine(keep);
        h.fill(ZERO);
        for i in 0..keep {
            h[(i, i)] = C64::new(ritz.values[i], 0.0);
        }
        if beta_m > 0.0 {
            let mut v: Vec<C64> = f.iter().map(|z| z / beta_m).collect();
            // guard against loss of orthogonality accumulated in the Ritz combination
            orthogonalize(&ys, &mut v);
            let nv = norm(&v);
            v.iter_mut().for_each(|z| *z /= nv);
            ys.push(v);
        } else {
            let v = random_unit(n, &mut rng, &ys);
            ys.push(v);
        }
        basis = ys;
        k = keep;
    }
    Err(Error::NonConvergence(format!(
        "Lanczos: {} restarts without convergence of {} eigenpairs",
        opts.max_restarts, nev
    )))
}

/// Lowest `nev` eigenvalues, dense below `dense_max` and Lanczos above.
pub fn lowest_eigenvalues<O: HermitianOperator + ?Sized>(op: &O, nev: usize, dense_max: usize, seed: u64) -> Result<Vec<f64>> {
    let opts = LanczosOptions { seed, ..LanczosOptions::new(nev) };
    if op.dim() <= dense_max {
        let opts = LanczosOptions { ncv: op.dim(), ..opts };
        return Ok(lanczos_lowest(op, &opts, false)?.values);
    }
    Ok(lanczos_lowest(op, &opts, false)?.values)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Cyclic Jacobi on the real symmetric embedding [[Re, −Im], [Im, Re]]; every
    /// eigenvalue appears twice, so keep every other one.
    pub(crate) fn jacobi_oracle(a: &DMatrix<C64>) -> Vec<f64> {
        let n = a.nrows();
        let m = 2 * n;
        let mut s = vec![vec![0.0f64; m]; m];
        for i in 0..n {
            for j in 0..n {
                let z = a[(i, j)];
                s[i][j] = z.re;
                s[i + n][j + n] = z.re;
                s[i][j + n] = -z.im;
                s[i + n][j] = z.im;
            }
        }
        for _ in 0..100 {
            let off: f64 = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| s[i][j] * s[i][j]).sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..m {
                for q in p + 1..m {
                    if s[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..m {
                        let (kp, kq) = (s[k][p], s[k][q]);
                        s[k][p] = c * kp - sn * kq;
                        s[k][q] = sn * kp + c * kq;
                    }
                    for k in 0..m {
                        let (pk, qk) = (s[p][k], s[q][k]);
                        s[p][k] = c * pk - sn * qk;
                        s[q][k] = sn * pk + c * qk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..m).map(|i| s[i][i]).collect();
        d.sort_by(f64::total_cmp);
        d.into_iter().step_by(2).collect()
    }

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn dense_matches_jacobi() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (24, 4)] {
            let a = random_hermitian(n, seed);
            let e = dense_eigh(a.clone(), false).unwrap();
            let o = jacobi_oracle(&a);
            for (x, y) in e.values.iter().zip(&o) {
                assert!((x - y).abs() < 1e-11, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn dense_vectors_are_eigenvectors() {
        let a = random_hermitian(12, 9);
        let e = dense_eigh(a.clone(), true).unwrap();
        let v = e.vectors.unwrap();
        for (i, lam) in e.values.iter().enumerate() {
            let col = v.column(i);
            let r = &a * col - col * C64::new(*lam, 0.0);
            assert!(r.norm() < 1e-12);
        }
        let gram = v.adjoint() * &v;
        assert!((gram - DMatrix::identity(12, 12)).norm() < 1e-12);
    }

    #[test]
    fn csr_round_trip() {
        let a = random_hermitian(9, 5);
        let rows = (0..9).map(|i| (0..9).map(|j| (j, a[(i, j)])).collect()).collect();
        let csr = CsrMatrix::from_rows(rows);
        assert!((csr.to_dense() - &a).norm() < 1e-15);
        let x: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut y = vec![ZERO; 9];
        csr.apply(&x, &mut y);
        let yd = &a * DMatrix::from_column_slice(9, 1, &x);
        for i in 0..9 {
            assert!((y[i] - yd[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn lanczos_path_graph_laplacian() {
        // tridiag(−1, 2, −1) with a complex gauge on the off-diagonal: eigenvalues 2 − 2cos(jπ/(n+1))
        let n = 600;
        let ph = C64::from_polar(1.0, 0.37);
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, C64::new(2.0, 0.0))];
                if i > 0 {
                    r.push((i - 1, -ph.conj()));
                }
                if i + 1 < n {
                    r.push((i + 1, -ph));
                }
                r
            })
            .collect();
        let csr = CsrMatrix::from_rows(rows);
        let e = lanczos_lowest(&csr, &LanczosOptions { ncv: 60, ..LanczosOptions::new(4) }, true).unwrap();
        for j in 0..4 {
            let exact = 2.0 - 2.0 * (((j + 1) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((e.values[j] - exact).abs() < 1e-11, "{j}: {} vs {exact}", e.values[j]);
        }
        let v = e.vectors.unwrap();
        let mut y = vec![ZERO; n];
        let x: Vec<C64> = v.column(0).iter().copied().collect();
        csr.apply(&x, &mut y);
        let r: f64 = y.iter().zip(&x).map(|(a, b)| (a - b * e.values[0]).norm_sqr()).sum::<f64>().sqrt();
        assert!(r < 1e-8);
    }

    #[test]
    fn lanczos_matches_dense_on_random() {
        let a = random_hermitian(150, 11);
        let e = lanczos_lowest(&a, &LanczosOptions { ncv: 40, ..LanczosOptions::new(5) }, false).unwrap();
        let o = jacobi_oracle(&a);
        for j in 0..5 {
            assert!((e.values[j] - o[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_small_falls_back_to_dense() {
        let a = random_hermitian(10, 12);
        let e = lanczos_lowest(&a, &LanczosOptions::new(3), false).unwrap();
        let o = jacobi_oracle(&a);
        assert_eq!(e.values.len(), 3);
        for j in 0..3 {
            assert!((e.values[j] - o[j]).abs() < 1e-11);
        }
    }

    #[test]
    fn lanczos_is_deterministic() {
        let a = random_hermitian(120, 13);
        let o = LanczosOptions { ncv: 30, ..LanczosOptions::new(3) };
        let x = lanczos_lowest(&a, &o, false).unwrap().values;
        let y = lanczos_lowest(&a, &o, false).unwrap().values;
        assert_eq!(x, y);
    }
}
