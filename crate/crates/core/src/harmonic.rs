//! Harmonic approximation of the low spectrum: E′_n = λ₋(0) + h·λ_n, where λ_n runs over
//! (2m₁+1)√c₁ + (2m₂+1)√c₂ in increasing order with multiplicity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::potential::{numeric_harmonic_data, EigMode, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarmonicMode {
    /// closed-form constants of the two-term expansion of the closed-form λ₋
    Paper,
    /// finite-difference Hessian of the true λ₋
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicData {
    pub mode: HarmonicMode,
    pub m0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub value: f64,
    pub m1: u32,
    pub m2: u32,
}

pub fn paper_coeffs(p: &ModelParams) -> Result<HarmonicData> {
    if p.alpha != 1.0 {
        return Err(Error::PaperModeAlpha(p.alpha));
    }
    let s = (9.0 * p.beta * p.beta + p.u * p.u).sqrt();
    let base = -8.0 * PI * PI * p.phi.cos();
    let b2 = p.beta * p.beta * PI * PI;
    // β = U = 0 leaves only the intralayer term
    let (t1, t2) = if s == 0.0 { (0.0, 0.0) } else { (2.0 * b2 / (3.0 * s), 6.0 * b2 / s) };
    let (c1, c2) = (base + t1, base + t2);
    if c1 <= 0.0 || c2 <= 0.0 {
        return Err(Error::NoPaperWell { c1, c2 });
    }
    Ok(HarmonicData { mode: HarmonicMode::Paper, m0: 6.0 * p.phi.cos() - 0.5 * s, c1, c2 })
}

pub fn numeric_coeffs(p: &ModelParams, lat: &Lattice) -> Result<HarmonicData> {
    let q = numeric_harmonic_data(p, lat, EigMode::Exact)?;
    Ok(HarmonicData { mode: HarmonicMode::Numeric, m0: q.m0, c1: q.c1, c2: q.c2 })
}

/// The `count` smallest oscillator levels, ties broken by (m₁, m₂).
pub fn levels_up_to(hd: &HarmonicData, count: usize) -> Vec<Level> {
    let (s1, s2) = (hd.c1.sqrt(), hd.c2.sqrt());
    // any index ≥ count is beaten by `count` smaller ones along the same axis
    let mut all = Vec::with_capacity(count * count);
    for m1 in 0..count as u32 {
        for m2 in 0..count as u32 {
            let value = (2 * m1 + 1) as f64 * s1 + (2 * m2 + 1) as f64 * s2;
            all.push(Level { value, m1, m2 });
        }
    }
    all.sort_by(|a, b| a.value.total_cmp(&b.value).then((a.m1, a.m2).cmp(&(b.m1, b.m2))));
    all.truncate(count);
    all
}

/// E′_n for n ≥ 1.
pub fn predicted_e(hd: &HarmonicData, h: f64, n: usize) -> f64 {
    assert!(n >= 1, "levels are numbered from 1");
    hd.m0 + h * levels_up_to(hd, n)[n - 1].value
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub lambda: f64,
    pub computed: f64,
    pub predicted: f64,
    pub error: f64,
    pub error_over_h: f64,
    pub error_over_h32: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub h: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Signed errors of `computed` (ascending, level 1 first) against the oscillator levels.
pub fn compare(computed: &[f64], hd: &HarmonicData, h: f64) -> Comparison {
    let levels = levels_up_to(hd, computed.len());
    let rows = computed
        .iter()
        .zip(&levels)
        .enumerate()
        .map(|(i, (&e, l))| {
            let predicted = hd.m0 + h * l.value;
            let error = e - predicted;
            ComparisonRow {
                n: i + 1,
                lambda: l.value,
                computed: e,
                predicted,
                error,
                error_over_h: error / h,
                error_over_h32: error / h.powf(1.5),
            }
        })
        .collect();
    Comparison { h, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use proptest::prelude::*;

    #[test]
    fn closed_form_constants_p0() {
        let hd = paper_coeffs(&ModelParams::p0(0.1)).unwrap();
        assert!((hd.m0 + 4.5).abs() < 1e-14);
        assert!((hd.c1 - 38.0 * PI * PI / 9.0).abs() < 1e-12);
        assert!((hd.c2 - 6.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn closed_form_constants_other() {
        let p = ModelParams { phi: PI / 2.0, ..ModelParams::p0(0.1) };
        let hd = paper_coeffs(&p).unwrap();
        assert!((hd.c1 - 2.0 * PI * PI / 9.0).abs() < 1e-12);
        assert!((hd.c2 - 2.0 * PI * PI).abs() < 1e-12);
        assert!((hd.m0 + 1.5).abs() < 1e-14);
        let p = ModelParams { beta: 0.0, phi: PI, ..ModelParams::p0(0.1) };
        let hd = paper_coeffs(&p).unwrap();
        assert!((hd.c1 - 8.0 * PI * PI).abs() < 1e-12 && (hd.c2 - hd.c1).abs() < 1e-12);
    }

    #[test]
    fn closed_form_rejects() {
        assert!(matches!(paper_coeffs(&ModelParams { phi: 0.0, ..ModelParams::p0(0.1) }), Err(Error::NoPaperWell { .. })));
        assert!(matches!(paper_coeffs(&ModelParams { alpha: 0.5, ..ModelParams::p0(0.1) }), Err(Error::PaperModeAlpha(_))));
    }

    #[test]
    fn finite_difference_reproduces_closed_form() {
        let q = numeric_harmonic_data(&ModelParams::p0(0.1), &build_lattice(), EigMode::Paper).unwrap();
        assert!((q.m0 + 4.5).abs() < 1e-6);
        assert!((q.c1 - 38.0 * PI * PI / 9.0).abs() < 1e-6, "{}", q.c1 - 38.0 * PI * PI / 9.0);
        assert!((q.c2 - 6.0 * PI * PI).abs() < 1e-6, "{}", q.c2 - 6.0 * PI * PI);
    }

    #[test]
    fn numeric_constants_p0() {
        let hd = numeric_coeffs(&ModelParams::p0(0.1), &build_lattice()).unwrap();
        assert_eq!(hd.mode, HarmonicMode::Numeric);
        assert!((hd.m0 + 6.0).abs() < 1e-12);
        assert!((hd.c1 - 43.8649).abs() < 1e-3 && (hd.c2 - 78.9568).abs() < 1e-3);
    }

    #[test]
    fn isotropic_levels() {
        let hd = HarmonicData { mode: HarmonicMode::Numeric, m0: 0.0, c1: 1.0, c2: 1.0 };
        let v: Vec<f64> = levels_up_to(&hd, 10).iter().map(|l| l.value).collect();
        assert_eq!(v, vec![2.0, 4.0, 4.0, 6.0, 6.0, 6.0, 8.0, 8.0, 8.0, 8.0]);
        let l = levels_up_to(&hd, 3);
        assert_eq!((l[1].m1, l[1].m2, l[2].m1, l[2].m2), (0, 1, 1, 0));
    }

    #[test]
    fn p0_closed_form_levels() {
        let hd = paper_coeffs(&ModelParams::p0(0.1)).unwrap();
        let l = levels_up_to(&hd, 3);
        assert!((l[0].value - 14.150658229442).abs() < 1e-9);
        assert!((l[1].value - 27.061376726385).abs() < 1e-9);
        assert!((l[2].value - 29.541256191385).abs() < 1e-9);
        assert!((predicted_e(&hd, 0.01, 1) + 4.358493417706).abs() < 1e-11);
        assert_eq!(predicted_e(&hd, 0.0, 4), hd.m0);
    }

    #[test]
    fn self_comparison_is_exact() {
        let hd = HarmonicData { mode: HarmonicMode::Numeric, m0: -2.0, c1: 3.0, c2: 5.0 };
        let h = 0.03;
        let synth: Vec<f64> = levels_up_to(&hd, 6).iter().map(|l| hd.m0 + h * l.value).collect();
        let c = compare(&synth, &hd, h);
        assert_eq!(c.rows.len(), 6);
        assert!(c.rows.iter().all(|r| r.error == 0.0 && r.error_over_h32 == 0.0));
    }

    #[test]
    fn collisions_counted_once() {
        // c2 = 9 c1: √c2 = 3√c1 makes many sums coincide
        let hd = HarmonicData { mode: HarmonicMode::Numeric, m0: 0.0, c1: 1.0, c2: 9.0 };
        let got = levels_up_to(&hd, 60);
        let mut brute: Vec<(f64, u32, u32)> = (0..=20u32)
            .flat_map(|a| (0..=20u32).map(move |b| ((2 * a + 1) as f64 + 3.0 * (2 * b + 1) as f64, a, b)))
            .collect();
        brute.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        for (g, b) in got.iter().zip(&brute) {
            assert_eq!((g.value, g.m1, g.m2), *b);
        }
    }

    proptest! {
        #[test]
        fn levels_ascending_and_stable(c1 in 0.1f64..50.0, c2 in 0.1f64..50.0, count in 1usize..40) {
            let hd = HarmonicData { mode: HarmonicMode::Numeric, m0: 0.0, c1, c2 };
            let a = levels_up_to(&hd, count);
            let b = levels_up_to(&hd, count + 15);
            prop_assert!(a.windows(2).all(|w| w[0].value <= w[1].value));
            prop_assert_eq!(&a[..], &b[..count]);
        }

        #[test]
        fn prediction_linear_in_h(h in 0.001f64..0.5, n in 1usize..8) {
            let hd = HarmonicData { mode: HarmonicMode::Numeric, m0: -1.0, c1: 2.0, c2: 7.0 };
            let d = predicted_e(&hd, 2.0 * h, n) - predicted_e(&hd, h, n);
            let lam = levels_up_to(&hd, n)[n - 1].value;
            prop_assert!((d - h * lam).abs() <= 1e-12 * lam.max(1.0));
        }
    }
}
