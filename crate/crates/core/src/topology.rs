//! Berry flux of a group of Bloch bands from multi-band link variables, and the
//! Chern number of the group.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::blochpw::{fiber_eigs, PlaneWaveBasis};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, KGrid};
use crate::potential::{fourier_table, ModelParams};

/// Gap below which a band group is not considered isolated.
pub const MIN_GAP: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureField {
    pub n1: usize,
    pub n2: usize,
    pub nbands: usize,
    /// plaquette (i, j) spans grid nodes (i..=i+1, j..=j+1); i-major, values in (−π, π]
    pub flux: Vec<f64>,
    pub chern: i64,
    /// |Σ flux / 2π − chern|
    pub quantization_defect: f64,
    pub min_gap: f64,
}

impl CurvatureField {
    pub fn flux_at(&self, i: usize, j: usize) -> f64 {
        self.flux[(i % self.n1) * self.n2 + j % self.n2]
    }

    pub fn max_abs_flux(&self) -> f64 {
        self.flux.iter().fold(0.0, |m, f| m.max(f.abs()))
    }
}

/// Re-express a frame at k as a frame at k + m g1 + n g2: c'(g) = c(g + shift).
pub fn shift_frame(frame: &DMatrix<C64>, basis: &PlaneWaveBasis, shift: (i32, i32)) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(frame.nrows(), frame.ncols());
    for (a, &(m, n)) in basis.gvecs.iter().enumerate() {
        if let Some(b) = basis.index_of((m + shift.0, n + shift.1)) {
            for l in 0..2 {
                for c in 0..frame.ncols() {
                    out[(2 * a + l, c)] = frame[(2 * b + l, c)];
                }
            }
        }
    }
    out
}

fn link(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    (a.adjoint() * b).determinant()
}

/// Plaquette fluxes from frames on an n1×n2 grid; `wrap(i, j)` supplies the frame at a
/// node past the zone boundary (i = n1 or j = n2), expressed at the shifted momentum.
pub fn flux_from_frames(
    frames: &[DMatrix<C64>],
    n1: usize,
    n2: usize,
    wrap: &dyn Fn(usize, usize) -> DMatrix<C64>,
) -> Vec<f64> {
    let get = |i: usize, j: usize| -> DMatrix<C64> {
        if i < n1 && j < n2 {
            frames[i * n2 + j].clone()
        } else {
            wrap(i, j)
        }
    };
    (0..n1 * n2)
        .map(|t| {
            let (i, j) = (t / n2, t % n2);
            let f00 = get(i, j);
            let f10 = get(i + 1, j);
            let f11 = get(i + 1, j + 1);
            let f01 = get(i, j + 1);
            let u = link(&f00, &f10) * link(&f10, &f11) * link(&f11, &f01) * link(&f01, &f00);
            u.arg()
        })
        .collect()
}

/// Sum of plaquette fluxes over 2π, rounded.
fn quantize(flux: &[f64]) -> (i64, f64) {
    let total = flux.iter().sum::<f64>() / (2.0 * std::f64::consts::PI);
    let chern = total.round() as i64;
    (chern, (total - chern as f64).abs())
}

/// Eigenframes of the lowest `nbands` bands at every grid node; also returns the gap
/// to band nbands+1 at each node.
pub fn band_frames(p: &ModelParams, grid: &KGrid, nbands: usize, basis: &PlaneWaveBasis) -> Result<(Vec<DMatrix<C64>>, Vec<f64>)> {
    if nbands == 0 {
        return Err(Error::InvalidParams("nbands must be positive".into()));
    }
    let table = fourier_table(p, &build_lattice());
    let sols: Vec<Result<_>> = grid
        .points
        .par_iter()
        .map(|&k| {
            let e = fiber_eigs(p, k, basis, &table, nbands + 1)?;
            let gap = e.values[nbands] - e.values[nbands - 1];
            Ok((e.vectors.columns(0, nbands).into_owned(), gap))
        })
        .collect();
    let mut frames = Vec::with_capacity(grid.len());
    let mut gaps = Vec::with_capacity(grid.len());
    for s in sols {
        let (f, g) = s?;
        frames.push(f);
        gaps.push(g);
    }
    Ok((frames, gaps))
}

fn field_from(frames: &[DMatrix<C64>], gaps: &[f64], grid: &KGrid, nbands: usize, basis: &PlaneWaveBasis) -> Result<CurvatureField> {
    let (n1, n2) = (grid.n1, grid.n2);
    let (worst, min_gap) = gaps.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &g)| if g < acc.1 { (i, g) } else { acc });
    if min_gap <= MIN_GAP {
        return Err(Error::GapClosure { k: grid.points[worst], gap: min_gap });
    }
    // node (i + a n1, j + b n2) is node (i, j) seen from k + a g1 + b g2
    let wrap = |i: usize, j: usize| {
        let (a, b) = ((i / n1) as i32, (j / n2) as i32);
        shift_frame(&frames[(i % n1) * n2 + j % n2], basis, (a, b))
    };
    let flux = flux_from_frames(frames, n1, n2, &wrap);
    let (chern, quantization_defect) = quantize(&flux);
    Ok(CurvatureField { n1, n2, nbands, flux, chern, quantization_defect, min_gap })
}

pub fn berry_links(p: &ModelParams, grid: &KGrid, nbands: usize, basis: &PlaneWaveBasis) -> Result<CurvatureField> {
    let (frames, gaps) = band_frames(p, grid, nbands, basis)?;
    field_from(&frames, &gaps, grid, nbands, basis)
}

#[derive(Clone, Debug, Serialize)]
pub struct OddnessReport {
    /// set when the check does not apply
    pub skipped: Option<String>,
    /// max over plaquettes of |flux(P) + flux(−P)|
    pub defect: f64,
    pub max_flux: f64,
}

fn grid_is_symmetric(grid: &KGrid) -> bool {
    let lat = build_lattice();
    (0..grid.n1).all(|i| {
        (0..grid.n2).all(|j| {
            let k = grid.points[grid.index(i, j)];
            let mk = grid.points[grid.index(grid.n1 - i, grid.n2 - j)];
            lat.dual_index(k + mk, 1e-9).is_some()
        })
    })
}

/// Point-reflection defect of the flux field; a diagnostic at U = 0, skipped otherwise.
pub fn curvature_oddness_check(p: &ModelParams, grid: &KGrid, nbands: usize, basis: &PlaneWaveBasis) -> Result<OddnessReport> {
    if p.u != 0.0 {
        return Ok(OddnessReport {
            skipped: Some(format!("U = {} ≠ 0: oddness is only expected without bias", p.u)),
            defect: 0.0,
            max_flux: 0.0,
        });
    }
    if !grid_is_symmetric(grid) {
        return Err(Error::AsymmetricGrid);
    }
    Ok(oddness_of(&berry_links(p, grid, nbands, basis)?))
}

pub fn oddness_of(field: &CurvatureField) -> OddnessReport {
    let (n1, n2) = (field.n1, field.n2);
    // plaquette with lower corner (i, j) maps to the one with lower corner (−i−1, −j−1)
    let defect = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| (field.flux_at(i, j) + field.flux_at(2 * n1 - 1 - i, 2 * n2 - 1 - j)).abs())
        .fold(0.0, f64::max);
    OddnessReport { skipped: None, defect, max_flux: field.max_abs_flux() }
}
