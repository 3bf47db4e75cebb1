//! Band widths across h, the fit ln w = a − b/h, and the flat-band audit.

use serde::Serialize;

use crate::blochpw::{bands_on, fiber_eigs, PlaneWaveBasis};
use crate::error::{Error, Result};
use crate::lattice::{KGrid, Lattice, Vec2};
use crate::potential::{fourier_table, wells_audit, EigMode, ModelParams, AUDIT_GRID};

pub const DEFAULT_H_LIST: [f64; 6] = [0.12, 0.10, 0.08, 0.07, 0.06, 0.05];
/// widths below this sit under the eigensolver residual and are left out of fits
pub const WIDTH_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub used: usize,
}

/// Least squares of ln w against 1/h.
pub fn exp_fit(h: &[f64], w: &[f64]) -> Result<ExpFit> {
    if h.len() != w.len() {
        return Err(Error::InvalidParams(format!("{} h values but {} widths", h.len(), w.len())));
    }
    if h.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: h.len() });
    }
    if let Some(&bad) = w.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositiveWidth(bad));
    }
    if h.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParams("h values must be positive".into()));
    }
    let n = h.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let y: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("h values must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let a = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(u, v)| (v - a - slope * u).powi(2)).sum();
    // a constant series is fitted exactly by b = 0
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(ExpFit { a, b: -slope, r2, used: h.len() })
}

/// Fit after dropping widths below [`WIDTH_FLOOR`].
pub fn fit_widths(h: &[f64], w: &[f64]) -> Result<ExpFit> {
    let (hs, ws): (Vec<f64>, Vec<f64>) = h.iter().zip(w).filter(|(_, &v)| v >= WIDTH_FLOOR).map(|(a, b)| (*a, *b)).unzip();
    exp_fit(&hs, &ws)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub h_list: Vec<f64>,
    /// widths[ih][band]
    pub widths: Vec<Vec<f64>>,
    pub fits: Vec<Option<ExpFit>>,
    pub gcut: f64,
    pub kgrid: (usize, usize),
    /// |E₁(gcut) − E₁(gcut + 2)| at Γ for the smallest h
    pub convergence_delta: f64,
    pub s0: Option<f64>,
    pub warnings: Vec<String>,
}

impl ScanResult {
    pub fn band_widths(&self, band: usize) -> Vec<f64> {
        self.widths.iter().map(|r| r[band]).collect()
    }

    /// Loose diagnostic: b within [0.3, 2.2]·S0.
    pub fn scale_consistent(&self, band: usize) -> Option<bool> {
        let (fit, s0) = (self.fits.get(band).copied().flatten()?, self.s0?);
        Some(fit.b >= 0.3 * s0 && fit.b <= 2.2 * s0)
    }
}

fn check_grid(kgrid: &KGrid) -> Result<()> {
    if kgrid.n1 < 6 || kgrid.n2 < 6 {
        return Err(Error::InvalidParams(format!("band widths need at least a 6×6 k-grid, got {}×{}", kgrid.n1, kgrid.n2)));
    }
    Ok(())
}

/// Widths of the lowest `nbands` bands for each h. One basis serves every h; by default
/// it is the one required at the smallest h.
pub fn band_widths(
    p: &ModelParams,
    h_list: &[f64],
    kgrid: &KGrid,
    nbands: usize,
    basis: Option<&PlaneWaveBasis>,
    lat: &Lattice,
) -> Result<ScanResult> {
    check_grid(kgrid)?;
    if h_list.is_empty() || nbands == 0 {
        return Err(Error::InvalidParams("need at least one h and one band".into()));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParams("h_list must be strictly descending".into()));
    }
    let hmin = *h_list.last().unwrap();
    p.with_h(hmin).validate()?;
    let audit = wells_audit(p, lat, AUDIT_GRID, EigMode::Exact)?;
    if !audit.assumption1_holds {
        return Err(Error::Assumption1(audit.notes.join("; ")));
    }
    let owned;
    let basis = match basis {
        Some(b) => b,
        None => {
            owned = PlaneWaveBasis::new(PlaneWaveBasis::auto_gcut(hmin, lat), lat)?;
            &owned
        }
    };
    let mut widths = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let bs = bands_on(&kgrid.points, &p.with_h(h), basis, nbands)?;
        widths.push((0..nbands).map(|i| bs.width(i)).collect::<Vec<f64>>());
    }

    let ps = p.with_h(hmin);
    let table = fourier_table(&ps, lat);
    let e_a = fiber_eigs(&ps, Vec2::ZERO, basis, &table, 1)?.values[0];
    let e_b = fiber_eigs(&ps, Vec2::ZERO, &PlaneWaveBasis::new(basis.gcut + 2.0, lat)?, &table, 1)?.values[0];
    let convergence_delta = (e_a - e_b).abs();

    let mut warnings = Vec::new();
    if convergence_delta > 1e-9 {
        warnings.push(format!("basis gcut={} not converged at h={hmin}: |ΔE₁| = {convergence_delta:e}", basis.gcut));
    }
    let mut fits = Vec::with_capacity(nbands);
    for band in 0..nbands {
        let col: Vec<f64> = widths.iter().map(|r| r[band]).collect();
        match fit_widths(h_list, &col) {
            Ok(f) => fits.push(Some(f)),
            Err(e) => {
                warnings.push(format!("band {}: no fit ({e})", band + 1));
                fits.push(None);
            }
        }
    }
    Ok(ScanResult {
        h_list: h_list.to_vec(),
        widths,
        fits,
        gcut: basis.gcut,
        kgrid: (kgrid.n1, kgrid.n2),
        convergence_delta,
        s0: None,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatbandReport {
    pub h: f64,
    pub widths: Vec<f64>,
    pub min_width: f64,
    /// 1-based band attaining the minimum
    pub flattest: usize,
}

/// Smallest width among the lowest bands: evidence, not proof, that none is flat.
pub fn flatband_audit(p: &ModelParams, nbands: usize, kgrid: &KGrid, basis: Option<&PlaneWaveBasis>, lat: &Lattice) -> Result<FlatbandReport> {
    p.validate()?;
    if nbands == 0 {
        return Err(Error::InvalidParams("need at least one band".into()));
    }
    let owned;
    let basis = match basis {
        Some(b) => b,
        None => {
            owned = PlaneWaveBasis::new(PlaneWaveBasis::auto_gcut(p.h, lat), lat)?;
            &owned
        }
    };
    let bs = bands_on(&kgrid.points, p, basis, nbands)?;
    let widths: Vec<f64> = (0..nbands).map(|i| bs.width(i)).collect();
    let (mut flattest, mut min_width) = (0, f64::INFINITY);
    for (i, &w) in widths.iter().enumerate() {
        if w < min_width {
            (flattest, min_width) = (i, w);
        }
    }
    Ok(FlatbandReport { h: p.h, widths, min_width, flattest: flattest + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const H: [f64; 6] = DEFAULT_H_LIST;

    #[test]
    fn synthetic_fit_exact() {
        let w: Vec<f64> = H.iter().map(|h| (2.0 - 5.0 / h).exp()).collect();
        let f = exp_fit(&H, &w).unwrap();
        assert!((f.a - 2.0).abs() < 1e-10 && (f.b - 5.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert_eq!(f.used, 6);
    }

    #[test]
    fn noisy_fit_within_three_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        for _ in 0..50 {
            let w: Vec<f64> = H.iter().map(|h| (2.0 - 5.0 / h).exp() * (1.0 + noise.sample(&mut rng))).collect();
            let f = exp_fit(&H, &w).unwrap();
            assert!((f.b - 5.0).abs() < 0.15, "b = {}", f.b);
            assert!(f.r2 > 0.99);
        }
    }

    #[test]
    fn constant_width() {
        let f = exp_fit(&H, &[3e-4; 6]).unwrap();
        assert_eq!(f.b, 0.0);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(exp_fit(&H[..3], &[1.0; 3]), Err(Error::InsufficientData { needed: 4, got: 3 })));
        assert!(matches!(exp_fit(&H, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0]), Err(Error::NonPositiveWidth(_))));
        let f = fit_widths(&H, &[1e-3, 1e-4, 1e-5, 1e-6, 1e-13, 0.0]).unwrap();
        assert_eq!(f.used, 4);
        assert!(matches!(fit_widths(&H, &[1e-3, 1e-4, 1e-5, 1e-13, 1e-14, 0.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn free_band_width() {
        let lat = build_lattice();
        let p = ModelParams { alpha: 0.0, beta: 0.0, u: 0.0, phi: 0.0, h: 0.3 };
        let grid = KGrid::new(6, 6, &lat).unwrap();
        let basis = PlaneWaveBasis::new(3.0, &lat).unwrap();
        let r = flatband_audit(&p, 1, &grid, Some(&basis), &lat).unwrap();
        let m: Vec<f64> = grid
            .points
            .iter()
            .map(|&k| basis.momenta.iter().map(|&g| (g + k).norm_sq()).fold(f64::INFINITY, f64::min))
            .collect();
        let spread = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - m.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((r.min_width - 0.09 * spread).abs() < 1e-10 * spread);
        assert!(r.min_width > 0.0);
    }

    #[test]
    fn p0_narrows_with_h() {
        let lat = build_lattice();
        let grid = KGrid::new(6, 6, &lat).unwrap();
        let basis = PlaneWaveBasis::new(8.0, &lat).unwrap();
        let r = band_widths(&ModelParams::p0(0.1), &[0.1, 0.08], &grid, 1, Some(&basis), &lat).unwrap();
        assert!(r.widths[1][0] < r.widths[0][0]);
        assert!(r.fits[0].is_none());
    }

    #[test]
    fn p0_no_flat_band_at_h1() {
        let lat = build_lattice();
        let grid = KGrid::new(6, 6, &lat).unwrap();
        let r = flatband_audit(&ModelParams::p0(1.0), 5, &grid, None, &lat).unwrap();
        assert!(r.min_width >= 1e-6, "{:?}", r.widths);
    }

    #[test]
    fn rejects_bad_inputs() {
        let lat = build_lattice();
        let small = KGrid::new(4, 6, &lat).unwrap();
        let grid = KGrid::new(6, 6, &lat).unwrap();
        assert!(band_widths(&ModelParams::p0(0.1), &H, &small, 1, None, &lat).is_err());
        assert!(band_widths(&ModelParams::p0(0.1), &[0.05, 0.1], &grid, 1, None, &lat).is_err());
        let off = ModelParams { phi: 1.32, ..ModelParams::p0(0.1) };
        assert!(matches!(band_widths(&off, &H, &grid, 1, None, &lat), Err(Error::Assumption1(_))));
    }
}
