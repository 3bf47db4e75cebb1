//! Finite-difference reference solver for the single-well operator
//! H_well = −h²Δ + V + (1 − χ) on a Dirichlet box: every well except the one at the
//! origin is lifted by one unit.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Vec2;
use crate::linalg::{lanczos_lowest_from, CsrMatrix, HermitianOperator, LanczosOptions};
use crate::potential::{assemble_v, Herm2, ModelParams};

/// Radial cutoff: 1 inside `inner`, 0 outside `outer`, C² quintic smoothstep between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { inner: 0.3, outer: 0.45 }
    }
}

impl Cutoff {
    pub fn eval(&self, x: Vec2) -> f64 {
        let r = x.norm();
        if r <= self.inner {
            return 1.0;
        }
        if r >= self.outer {
            return 0.0;
        }
        let t = (r - self.inner) / (self.outer - self.inner);
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// 5-point Laplacian, O(dx²)
    Second,
    /// 9-point cross (−1/12, 4/3, −5/2, 4/3, −1/12 per axis), O(dx⁴) in the interior
    Fourth,
}

impl Stencil {
    fn weights(self) -> &'static [f64] {
        match self {
            Stencil::Second => &[-2.0, 1.0],
            Stencil::Fourth => &[-2.5, 4.0 / 3.0, -1.0 / 12.0],
        }
    }

    pub fn order(self) -> i32 {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WellProblem {
    pub params: ModelParams,
    /// box is [−L, L]²
    pub half_width: f64,
    /// interior nodes per axis; spacing 2L/(n+1)
    pub n: usize,
    pub chi: Cutoff,
    pub stencil: Stencil,
}

impl WellProblem {
    /// L = 1.5, n = 256 (384 below h = 0.05), second-order stencil.
    pub fn new(params: ModelParams) -> Self {
        let n = if params.h < 0.05 { 384 } else { 256 };
        WellProblem { params, half_width: 1.5, n, chi: Cutoff::default(), stencil: Stencil::Second }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n as f64 + 1.0)
    }

    /// Same box, spacing halved.
    pub fn refined(&self) -> Self {
        WellProblem { n: 2 * self.n + 1, ..*self }
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let dx = self.spacing();
        Vec2::new(-self.half_width + (i + 1) as f64 * dx, -self.half_width + (j + 1) as f64 * dx)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n < 64 {
            return Err(Error::UnderResolved(self.n));
        }
        let c = self.chi;
        if !(0.0 < c.inner && c.inner < c.outer && c.outer < 1.0) {
            return Err(Error::InvalidParams(format!(
                "cutoff radii must satisfy 0 < inner < outer < 1, got ({}, {})",
                c.inner, c.outer
            )));
        }
        if self.half_width < c.outer + 0.25 {
            return Err(Error::InvalidParams(format!(
                "box half-width {} must be at least outer radius + 0.25",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Matrix-free H_well: per-node 2×2 potential plus a separable Laplacian stencil.
#[derive(Clone, Debug)]
pub struct WellOperator {
    pub n: usize,
    kin: f64,
    weights: &'static [f64],
    pot: Vec<Herm2>,
}

impl WellOperator {
    pub fn potential_at(&self, i: usize, j: usize) -> Herm2 {
        self.pot[i * self.n + j]
    }

    /// Explicit sparse form; rows in node-major, layer-minor order.
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.n;
        let w = self.weights;
        let mut rows = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let node = i * n + j;
                let v = self.pot[node];
                for l in 0..2 {
                    let diag = if l == 0 { v.a } else { v.d };
                    let mut row = vec![(2 * node + l, C64::new(diag - 2.0 * self.kin * w[0], 0.0))];
                    row.push((2 * node + 1 - l, if l == 0 { v.b } else { v.b.conj() }));
                    for (s, &ws) in w.iter().enumerate().skip(1) {
                        let c = C64::new(-self.kin * ws, 0.0);
                        if i >= s {
                            row.push((2 * (node - s * n) + l, c));
                        }
                        if i + s < n {
                            row.push((2 * (node + s * n) + l, c));
                        }
                        if j >= s {
                            row.push((2 * (node - s) + l, c));
                        }
                        if j + s < n {
                            row.push((2 * (node + s) + l, c));
                        }
                    }
                    rows.push(row);
                }
            }
        }
        CsrMatrix::from_rows(rows)
    }
}

impl HermitianOperator for WellOperator {
    fn dim(&self) -> usize {
        2 * self.n * self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.n;
        let w = self.weights;
        let k = self.kin;
        let d0 = -2.0 * k * w[0];
        for i in 0..n {
            for j in 0..n {
                let node = i * n + j;
                let v = self.pot[node];
                let (x0, x1) = (x[2 * node], x[2 * node + 1]);
                let mut y0 = x0 * (v.a + d0) + v.b * x1;
                let mut y1 = x1 * (v.d + d0) + v.b.conj() * x0;
                for (s, &ws) in w.iter().enumerate().skip(1) {
                    let mut acc0 = C64::new(0.0, 0.0);
                    let mut acc1 = C64::new(0.0, 0.0);
                    for (ok, nb) in [
                        (i >= s, node.wrapping_sub(s * n)),
                        (i + s < n, node + s * n),
                        (j >= s, node.wrapping_sub(s)),
                        (j + s < n, node + s),
                    ] {
                        if ok {
                            acc0 += x[2 * nb];
                            acc1 += x[2 * nb + 1];
                        }
                    }
                    y0 -= acc0 * (k * ws);
                    y1 -= acc1 * (k * ws);
                }
                y[2 * node] = y0;
                y[2 * node + 1] = y1;
            }
        }
    }
}

/// H_well for the model potential.
pub fn assemble_well(wp: &WellProblem) -> Result<WellOperator> {
    let p = wp.params;
    assemble_well_with(wp, &|x| {
        let mut v = assemble_v(x, &p);
        let lift = 1.0 - wp.chi.eval(x);
        v.a += lift;
        v.d += lift;
        v
    })
}

/// Same grid and kinetic term with an arbitrary pointwise 2×2 potential (no cutoff lift).
pub fn assemble_well_with(wp: &WellProblem, pot: &dyn Fn(Vec2) -> Herm2) -> Result<WellOperator> {
    wp.validate()?;
    let n = wp.n;
    let dx = wp.spacing();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(pot(wp.node(i, j)));
        }
    }
    Ok(WellOperator { n, kin: wp.params.h * wp.params.h / (dx * dx), weights: wp.stencil.weights(), pot: v })
}

#[derive(Clone, Debug, Serialize)]
pub struct WellSpectrum {
    pub h: f64,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub half_width: f64,
    pub n: usize,
    pub stencil: Stencil,
}

/// Lowest `nev` eigenpairs of an assembled operator; residual ≤ 1e-8 relative is enforced.
pub fn operator_eigs(op: &WellOperator, nev: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    operator_eigs_from(op, nev, None).map(|(v, r, _)| (v, r))
}

fn operator_eigs_from(op: &WellOperator, nev: usize, start: Option<&[C64]>) -> Result<(Vec<f64>, Vec<f64>, Vec<C64>)> {
    if nev == 0 || nev > 20 {
        return Err(Error::InvalidParams(format!("nev must lie in 1..=20, got {nev}")));
    }
    let opts = LanczosOptions { nev, ncv: (2 * nev + 20).max(30), tol: 1e-9, max_restarts: 20_000, seed: 0x77e11 };
    let e = lanczos_lowest_from(op, &opts, true, start)?;
    let vecs = e.vectors.unwrap();
    let dim = op.dim();
    let mut y = vec![C64::new(0.0, 0.0); dim];
    let mut res = Vec::with_capacity(nev);
    for (c, &lam) in e.values.iter().enumerate() {
        let x: Vec<C64> = vecs.column(c).iter().copied().collect();
        op.apply(&x, &mut y);
        let r = y.iter().zip(&x).map(|(a, b)| (a - b * lam).norm_sqr()).sum::<f64>().sqrt();
        if r > 1e-8 * lam.abs().max(1.0) {
            return Err(Error::NonConvergence(format!("well eigenpair {c}: residual {r:e}")));
        }
        res.push(r);
    }
    let ground = vecs.column(0).iter().copied().collect();
    Ok((e.values, res, ground))
}

pub fn well_eigs(wp: &WellProblem, nev: usize) -> Result<WellSpectrum> {
    let op = assemble_well(wp)?;
    let (values, residuals) = operator_eigs(&op, nev)?;
    Ok(WellSpectrum { h: wp.params.h, values, residuals, half_width: wp.half_width, n: wp.n, stencil: wp.stencil })
}

/// Bilinear prolongation of a two-component grid function from n to 2n+1 nodes per axis.
pub fn prolong(coarse: &[C64], n: usize) -> Vec<C64> {
    let m = 2 * n + 1;
    // fine index 2i+1 sits on coarse node i; even fine indices are midpoints (boundary = 0)
    let at = |i: isize, j: isize, l: usize| -> C64 {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            C64::new(0.0, 0.0)
        } else {
            coarse[2 * (i as usize * n + j as usize) + l]
        }
    };
    let mut fine = vec![C64::new(0.0, 0.0); 2 * m * m];
    for fi in 0..m {
        for fj in 0..m {
            let (ci, cj) = ((fi as isize - 1) / 2, (fj as isize - 1) / 2);
            let xs: &[isize] = if fi % 2 == 1 { &[0] } else { &[-1, 0] };
            let ys: &[isize] = if fj % 2 == 1 { &[0] } else { &[-1, 0] };
            let ci = if fi % 2 == 1 { ci } else { fi as isize / 2 };
            let cj = if fj % 2 == 1 { cj } else { fj as isize / 2 };
            let wgt = 1.0 / (xs.len() * ys.len()) as f64;
            for l in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for &a in xs {
                    for &b in ys {
                        s += at(ci + a, cj + b, l);
                    }
                }
                fine[2 * (fi * m + fj) + l] = s * wgt;
            }
        }
    }
    fine
}

/// Ground energy from grids n and 2n+1, with the stencil's leading error term removed.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Richardson {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
    /// |fine − extrapolated|, the error estimate of the fine-grid value
    pub error_estimate: f64,
}

pub fn richardson_e1(wp: &WellProblem) -> Result<Richardson> {
    let (cv, _, ground) = operator_eigs_from(&assemble_well(wp)?, 1, None)?;
    let fine_wp = wp.refined();
    let start = prolong(&ground, wp.n);
    let (fv, _, _) = operator_eigs_from(&assemble_well(&fine_wp)?, 1, Some(&start))?;
    let (coarse, fine) = (cv[0], fv[0]);
    let f = 2f64.powi(wp.stencil.order());
    let extrapolated = fine + (fine - coarse) / (f - 1.0);
    Ok(Richardson { coarse, fine, extrapolated, error_estimate: (fine - extrapolated).abs() })
}
