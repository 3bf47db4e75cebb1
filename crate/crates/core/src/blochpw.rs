//! Plane-wave Galerkin discretisation of the Bloch fibers H_k = h²(D+k)² + V.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec2};
use crate::linalg::{dense_eigh, lanczos_lowest, CsrMatrix, HermitianOperator, LanczosOptions};
use crate::potential::{fourier_table, FourierTable, ModelParams};

/// Matrices up to this dimension are diagonalised densely.
pub const DENSE_MAX: usize = 300;
const RESIDUAL_TOL: f64 = 1e-10;

/// Plane waves e^{i⟨g,x⟩} with |g| ≤ gcut·|g1|, two layer components each.
#[derive(Clone, Debug)]
pub struct PlaneWaveBasis {
    pub gcut: f64,
    pub gvecs: Vec<(i32, i32)>,
    pub momenta: Vec<Vec2>,
    index: HashMap<(i32, i32), usize>,
}

impl PlaneWaveBasis {
    pub fn new(gcut: f64, lat: &Lattice) -> Result<Self> {
        if !(gcut.is_finite() && gcut > 0.0) {
            return Err(Error::InvalidParams(format!("gcut must be positive, got {gcut}")));
        }
        // |m g1 + n g2|² = |g1|² (m² + mn + n²)
        let r = (gcut * 2.0 / 3f64.sqrt()).ceil() as i32 + 1;
        let lim = gcut * gcut * (1.0 + 1e-12);
        let mut gvecs = Vec::new();
        for m in -r..=r {
            for n in -r..=r {
                if ((m * m + m * n + n * n) as f64) <= lim {
                    gvecs.push((m, n));
                }
            }
        }
        gvecs.sort_by_key(|&(m, n)| (m * m + m * n + n * n, m, n));
        let momenta = gvecs.iter().map(|&(m, n)| lat.dual_point(m as f64, n as f64)).collect();
        let index = gvecs.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        Ok(PlaneWaveBasis { gcut, gvecs, momenta, index })
    }

    /// Cutoff large enough for the low states at semiclassical parameter h:
    /// wavefunctions of width ~√h need |g| up to about √(400/h).
    pub fn auto_gcut(h: f64, lat: &Lattice) -> f64 {
        ((400.0 / h).sqrt() / lat.g1.norm()).ceil().max(6.0)
    }

    pub fn len(&self) -> usize {
        self.gvecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gvecs.is_empty()
    }

    pub fn dim(&self) -> usize {
        2 * self.gvecs.len()
    }

    pub fn index_of(&self, g: (i32, i32)) -> Option<usize> {
        self.index.get(&g).copied()
    }
}

#[derive(Clone, Debug)]
pub struct BlochMatrix {
    pub k: Vec2,
    pub dim: usize,
    pub entries: DMatrix<C64>,
}

fn bloch_rows(p: &ModelParams, k: Vec2, basis: &PlaneWaveBasis, table: &FourierTable) -> Vec<Vec<(usize, C64)>> {
    let h2 = p.h * p.h;
    let mut rows = Vec::with_capacity(basis.dim());
    for (a, &(m, n)) in basis.gvecs.iter().enumerate() {
        let kin = h2 * (basis.momenta[a] + k).norm_sq();
        for i in 0..2 {
            let mut row = vec![(2 * a + i, C64::new(kin, 0.0))];
            for (&(qm, qn), c) in &table.entries {
                if let Some(b) = basis.index_of((m - qm, n - qn)) {
                    for (j, cij) in c[i].iter().enumerate() {
                        if *cij != C64::new(0.0, 0.0) {
                            row.push((2 * b + j, *cij));
                        }
                    }
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// Dense H_k; index 2·a + layer for plane wave a.
pub fn assemble_bloch(p: &ModelParams, k: Vec2, basis: &PlaneWaveBasis, table: &FourierTable) -> BlochMatrix {
    let csr = assemble_bloch_sparse(p, k, basis, table);
    BlochMatrix { k, dim: csr.n, entries: csr.to_dense() }
}

pub fn assemble_bloch_sparse(p: &ModelParams, k: Vec2, basis: &PlaneWaveBasis, table: &FourierTable) -> CsrMatrix {
    CsrMatrix::from_rows(bloch_rows(p, k, basis, table))
}

/// Lowest eigenpairs with phase-fixed vectors and true residuals ‖Hv − Ev‖.
#[derive(Clone, Debug)]
pub struct EigResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
    pub residuals: Vec<f64>,
}

/// Rotate each column so its largest-magnitude entry (first on ties) is real positive.
pub fn fix_phases(v: &mut DMatrix<C64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        let mut bm = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > bm * (1.0 + 1e-12) {
                bm = a;
                best = i;
            }
        }
        if bm > 0.0 {
            let ph = col[best].conj() / bm;
            col.iter_mut().for_each(|z| *z *= ph);
        }
    }
}

fn inf_norm(op: &CsrMatrix) -> f64 {
    (0..op.n)
        .map(|i| (op.row_ptr[i]..op.row_ptr[i + 1]).map(|q| op.vals[q].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn finish<O: HermitianOperator + ?Sized>(op: &O, hnorm: f64, values: Vec<f64>, mut vectors: DMatrix<C64>) -> Result<EigResult> {
    fix_phases(&mut vectors);
    let n = op.dim();
    let mut y = vec![C64::new(0.0, 0.0); n];
    let mut residuals = Vec::with_capacity(values.len());
    for (c, &e) in values.iter().enumerate() {
        let x: Vec<C64> = vectors.column(c).iter().copied().collect();
        op.apply(&x, &mut y);
        let r = y.iter().zip(&x).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
        if r > RESIDUAL_TOL * hnorm.max(1.0) {
            return Err(Error::NonConvergence(format!("eigenpair {c}: residual {r:e} exceeds {RESIDUAL_TOL:e}·‖H‖")));
        }
        residuals.push(r);
    }
    Ok(EigResult { values, vectors, residuals })
}

/// Lowest `nev` eigenpairs of a dense Bloch matrix.
pub fn hermitian_eigs(m: &BlochMatrix, nev: usize) -> Result<EigResult> {
    if nev > m.dim {
        return Err(Error::InvalidParams(format!("nev = {nev} exceeds dimension {}", m.dim)));
    }
    let hnorm = m.entries.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let e = dense_eigh(m.entries.clone(), true)?;
    let vecs = e.vectors.unwrap().columns(0, nev).into_owned();
    finish(&m.entries, hnorm, e.values[..nev].to_vec(), vecs)
}

/// Lowest `nev` eigenpairs of H_k: dense up to [`DENSE_MAX`], thick-restart Lanczos beyond.
pub fn fiber_eigs(p: &ModelParams, k: Vec2, basis: &PlaneWaveBasis, table: &FourierTable, nev: usize) -> Result<EigResult> {
    let csr = assemble_bloch_sparse(p, k, basis, table);
    if nev > csr.n {
        return Err(Error::InvalidParams(format!("nev = {nev} exceeds dimension {}", csr.n)));
    }
    let hnorm = inf_norm(&csr);
    if csr.n <= DENSE_MAX {
        let e = dense_eigh(csr.to_dense(), true)?;
        let vecs = e.vectors.unwrap().columns(0, nev).into_owned();
        return finish(&csr, hnorm, e.values[..nev].to_vec(), vecs);
    }
    let opts = LanczosOptions { ncv: (2 * nev + 30).max(50), tol: 1e-12, ..LanczosOptions::new(nev) };
    let e = lanczos_lowest(&csr, &opts, true)?;
    finish(&csr, hnorm, e.values, e.vectors.unwrap())
}

#[derive(Clone, Debug, Serialize)]
pub struct BandStructure {
    pub k: Vec<Vec2>,
    /// rows ascending
    pub energies: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub params: ModelParams,
    pub gcut: f64,
    pub dim: usize,
}

impl BandStructure {
    pub fn band(&self, i: usize) -> Vec<f64> {
        self.energies.iter().map(|r| r[i]).collect()
    }

    pub fn width(&self, i: usize) -> f64 {
        let b = self.band(i);
        b.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalues at each k, solved concurrently and collected in input order.
pub fn bands_on(points: &[Vec2], p: &ModelParams, basis: &PlaneWaveBasis, nbands: usize) -> Result<BandStructure> {
    let table = fourier_table(p, &crate::lattice::build_lattice());
    let rows: Vec<Result<EigResult>> = points.par_iter().map(|&k| fiber_eigs(p, k, basis, &table, nbands)).collect();
    let mut energies = Vec::with_capacity(points.len());
    let mut residuals = Vec::with_capacity(points.len());
    for r in rows {
        let r = r?;
        energies.push(r.values);
        residuals.push(r.residuals);
    }
    Ok(BandStructure { k: points.to_vec(), energies, residuals, params: *p, gcut: basis.gcut, dim: basis.dim() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub gcut: f64,
    pub dim: usize,
    pub e1: f64,
    /// |E₁(this) − E₁(previous)|
    pub delta: Option<f64>,
}

pub fn convergence_study(p: &ModelParams, k: Vec2, gcuts: &[f64], lat: &Lattice) -> Result<Vec<ConvergenceRow>> {
    if gcuts.len() < 3 {
        return Err(Error::InvalidParams("convergence study needs at least 3 cutoffs".into()));
    }
    if gcuts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("cutoffs must be ascending".into()));
    }
    let table = fourier_table(p, lat);
    let mut out: Vec<ConvergenceRow> = Vec::with_capacity(gcuts.len());
    for &gc in gcuts {
        let basis = PlaneWaveBasis::new(gc, lat)?;
        let e1 = fiber_eigs(p, k, &basis, &table, 1)?.values[0];
        let delta = out.last().map(|r| (e1 - r.e1).abs());
        out.push(ConvergenceRow { gcut: gc, dim: basis.dim(), e1, delta });
    }
    Ok(out)
}
