//! The 2×2 Hermitian moiré potential V(x), its pointwise eigenvalue landscape,
//! exact Fourier coefficients and the single-well audit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{rotate, Lattice, Vec2};

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// |(4π/√3) e1|, the length of every nonzero Fourier momentum of V.
pub const MOMENTUM: f64 = 4.0 * PI / SQRT3;

/// Physical knobs of the semiclassical Hamiltonian −h²Δ + V.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub phi: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, u: f64, phi: f64, h: f64) -> Result<Self> {
        let p = ModelParams { alpha, beta, u, phi, h };
        p.validate()?;
        Ok(p)
    }

    /// The reference parameter set (α, β, U, φ) = (1, 1, 0, 4π/3).
    pub fn p0(h: f64) -> Self {
        ModelParams { alpha: 1.0, beta: 1.0, u: 0.0, phi: 4.0 * PI / 3.0, h }
    }

    pub fn with_h(self, h: f64) -> Self {
        ModelParams { h, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("U", self.u),
            ("phi", self.phi),
            ("h", self.h),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.h <= 0.0 {
            return Err(Error::InvalidParams("h must be positive".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidParams("alpha must be nonnegative".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParams("beta must be nonnegative".into()));
        }
        if !(0.0..2.0 * PI).contains(&self.phi) {
            return Err(Error::InvalidParams("phi must lie in [0, 2π)".into()));
        }
        Ok(())
    }
}

/// (V↑(x), V↓(x)).
pub fn eval_intralayer(x: Vec2, phi: f64) -> (f64, f64) {
    let a = 4.0 * PI * x.x / SQRT3;
    let b = 2.0 * PI * x.x / SQRT3;
    let c = (2.0 * PI * x.y).cos();
    let up = 2.0 * ((a + phi).cos() + 2.0 * (b - phi).cos() * c);
    let down = 2.0 * ((a - phi).cos() + 2.0 * (b + phi).cos() * c);
    (up, down)
}

/// Interlayer tunnelling T(x) = 1 + 2 e^{−2πi x1/√3} cos(2π x2).
pub fn eval_t(x: Vec2) -> C64 {
    let c = 2.0 * (2.0 * PI * x.y).cos();
    C64::new(1.0, 0.0) + C64::from_polar(c, -2.0 * PI * x.x / SQRT3)
}

/// Hermitian 2×2 matrix [[a, b], [b*, d]].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Herm2 {
    pub a: f64,
    pub d: f64,
    pub b: C64,
}

impl Herm2 {
    pub fn to_array(self) -> [[C64; 2]; 2] {
        [
            [C64::new(self.a, 0.0), self.b],
            [self.b.conj(), C64::new(self.d, 0.0)],
        ]
    }

    /// Ascending eigenvalues (λ₋, λ₊).
    pub fn eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.d);
        let half = 0.5 * (self.a - self.d);
        let r = half.hypot(self.b.norm());
        (mean - r, mean + r)
    }
}

pub fn assemble_v(x: Vec2, p: &ModelParams) -> Herm2 {
    let (up, down) = eval_intralayer(x, p.phi);
    Herm2 {
        a: p.alpha * up + 0.5 * p.u,
        d: p.alpha * down - 0.5 * p.u,
        b: p.beta * eval_t(x),
    }
}

/// True eigenvalues (λ₋, λ₊) of V(x).
pub fn eigs_exact(x: Vec2, p: &ModelParams) -> (f64, f64) {
    assemble_v(x, p).eigenvalues()
}

/// The closed form (V↑+V↓)/2 ∓ U_eff with U_eff = √((V↑−V↓+U)² + β²|T|²)/2, kept for
/// comparison with the published expansion constants. Differs from [`eigs_exact`] by a
/// factor 2 on the coupling term.
pub fn eigs_papermode(x: Vec2, p: &ModelParams) -> Result<(f64, f64)> {
    if p.alpha != 1.0 {
        return Err(Error::PaperModeAlpha(p.alpha));
    }
    let (up, down) = eval_intralayer(x, p.phi);
    let mean = 0.5 * (up + down);
    let ueff = 0.5 * (up - down + p.u).hypot(p.beta * eval_t(x).norm());
    Ok((mean - ueff, mean + ueff))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigMode {
    Exact,
    Paper,
}

impl EigMode {
    pub fn lambda_minus(self, x: Vec2, p: &ModelParams) -> Result<f64> {
        match self {
            EigMode::Exact => Ok(eigs_exact(x, p).0),
            EigMode::Paper => eigs_papermode(x, p).map(|e| e.0),
        }
    }

    pub fn pair(self, x: Vec2, p: &ModelParams) -> Result<(f64, f64)> {
        match self {
            EigMode::Exact => Ok(eigs_exact(x, p)),
            EigMode::Paper => eigs_papermode(x, p),
        }
    }
}

/// Gap λ₊ − λ₋ at the origin in both eigenvalue modes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModeDiscrepancy {
    pub exact_gap: f64,
    pub paper_gap: f64,
    pub ratio: f64,
}

pub fn mode_discrepancy(p: &ModelParams) -> Result<ModeDiscrepancy> {
    let (a, b) = eigs_exact(Vec2::ZERO, p);
    let (c, d) = eigs_papermode(Vec2::ZERO, p)?;
    Ok(ModeDiscrepancy { exact_gap: b - a, paper_gap: d - c, ratio: (b - a) / (d - c) })
}

/// Coordinate chart y ↦ x with x1 = √3(y2 − y1)/(4π), x2 = −(y1 + y2)/(4π).
pub fn from_numeric_coords(y: Vec2) -> Vec2 {
    Vec2::new(SQRT3 * (y.y - y.x) / (4.0 * PI), -(y.x + y.y) / (4.0 * PI))
}

/// Inverse chart: y = (⟨x, g1⟩, ⟨x, g2⟩).
pub fn to_numeric_coords(x: Vec2) -> Vec2 {
    Vec2::new(-2.0 * PI * (x.x / SQRT3 + x.y), 2.0 * PI * (x.x / SQRT3 - x.y))
}

/// Intralayer potentials written in the numeric chart.
pub fn numeric_intralayer(y: Vec2, phi: f64) -> (f64, f64) {
    let up = 2.0 * ((y.x + phi).cos() + (y.y - phi).cos() + (y.x - y.y - phi).cos());
    let down = 2.0 * ((y.x - phi).cos() + (y.y + phi).cos() + (y.x - y.y + phi).cos());
    (up, down)
}

/// Fourier coefficients of V keyed by integer dual coordinates (m, n) ↔ m g1 + n g2.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTable {
    pub entries: BTreeMap<(i32, i32), [[C64; 2]; 2]>,
}

impl FourierTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, mn: (i32, i32)) -> Option<&[[C64; 2]; 2]> {
        self.entries.get(&mn)
    }

    /// Σ_g V̂(g) e^{i⟨g,x⟩}.
    pub fn reconstruct(&self, x: Vec2, lat: &Lattice) -> [[C64; 2]; 2] {
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (&(m, n), c) in &self.entries {
            let g = lat.dual_point(m as f64, n as f64);
            let ph = C64::from_polar(1.0, g.dot(x));
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += c[i][j] * ph;
                }
            }
        }
        out
    }
}

/// The three momenta (4π/√3) R^{2(j−1)} e1, j = 1, 2, 3.
pub fn intralayer_momenta() -> [Vec2; 3] {
    let e = Vec2::new(MOMENTUM, 0.0);
    let r2 = rotate(rotate(e));
    [e, r2, rotate(rotate(r2))]
}

pub fn fourier_table(p: &ModelParams, lat: &Lattice) -> FourierTable {
    let mut entries: BTreeMap<(i32, i32), [[C64; 2]; 2]> = BTreeMap::new();
    let zero = [[C64::new(0.0, 0.0); 2]; 2];
    let idx = |q: Vec2| lat.dual_index(q, 1e-9).expect("potential momentum off the dual lattice");
    let mut add = |q: Vec2, i: usize, j: usize, c: C64| {
        if c != C64::new(0.0, 0.0) {
            entries.entry(idx(q)).or_insert(zero)[i][j] += c;
        }
    };

    // 2 cos(q·x ± φ) = e^{±iφ} e^{iq·x} + e^{∓iφ} e^{−iq·x}
    let eph = C64::from_polar(p.alpha, p.phi);
    for q in intralayer_momenta() {
        add(q, 0, 0, eph);
        add(-q, 0, 0, eph.conj());
        add(q, 1, 1, eph.conj());
        add(-q, 1, 1, eph);
    }

    // T = 1 + e^{i⟨(4π/√3)Re1, x⟩} + e^{i⟨(4π/√3)R²e1, x⟩}; the (2,1) block carries T*.
    let e = Vec2::new(MOMENTUM, 0.0);
    let beta = C64::new(p.beta, 0.0);
    for q in [Vec2::ZERO, rotate(e), rotate(rotate(e))] {
        add(q, 0, 1, beta);
        add(-q, 1, 0, beta);
    }

    add(Vec2::ZERO, 0, 0, C64::new(0.5 * p.u, 0.0));
    add(Vec2::ZERO, 1, 1, C64::new(-0.5 * p.u, 0.0));
    entries.entry((0, 0)).or_insert(zero);
    FourierTable { entries }
}

/// Discrete Fourier coefficients of V sampled at x = (i/n) v1 + (j/n) v2, by direct
/// summation, for every (m, n) with |m|, |n| < n/2. Exact for band-limited V.
pub fn sampled_fourier(p: &ModelParams, lat: &Lattice, n: usize) -> BTreeMap<(i32, i32), [[C64; 2]; 2]> {
    let samples: Vec<[[C64; 2]; 2]> = (0..n * n)
        .map(|t| assemble_v(lat.real_point((t / n) as f64 / n as f64, (t % n) as f64 / n as f64), p).to_array())
        .collect();
    let half = (n as i32 - 1) / 2;
    let norm = 1.0 / (n * n) as f64;
    let mut out = BTreeMap::new();
    for m in -half..=half {
        for l in -half..=half {
            let mut c = [[C64::new(0.0, 0.0); 2]; 2];
            for (t, s) in samples.iter().enumerate() {
                let (i, j) = ((t / n) as i64, (t % n) as i64);
                // ⟨m g1 + l g2, (i/n) v1 + (j/n) v2⟩ = 2π (m i + l j)/n
                let k = (m as i64 * i + l as i64 * j).rem_euclid(n as i64);
                let ph = C64::from_polar(norm, -2.0 * PI * k as f64 / n as f64);
                for a in 0..2 {
                    for b in 0..2 {
                        c[a][b] += s[a][b] * ph;
                    }
                }
            }
            out.insert((m, l), c);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierCheck {
    pub grid: usize,
    pub n_points: usize,
    /// max |V̂_table − V̂_sampled| over all sampled momenta
    pub table_error: f64,
    /// max |Σ V̂ e^{igx} − V(x)| over random points
    pub reconstruct_error: f64,
}

/// Compares the analytic table with sampled coefficients and with V at seeded random points.
pub fn fourier_check(p: &ModelParams, lat: &Lattice, grid: usize, n_points: usize, seed: u64) -> Result<FourierCheck> {
    use rand::{Rng, SeedableRng};
    if grid < 8 {
        return Err(Error::InvalidParams("Fourier check grid must be at least 8 (the table reaches |m|, |n| = 2)".into()));
    }
    let table = fourier_table(p, lat);
    let sampled = sampled_fourier(p, lat, grid);
    let zero = [[C64::new(0.0, 0.0); 2]; 2];
    let mut table_error = 0.0f64;
    for (mn, c) in &sampled {
        let t = table.get(*mn).unwrap_or(&zero);
        for a in 0..2 {
            for b in 0..2 {
                table_error = table_error.max((t[a][b] - c[a][b]).norm());
            }
        }
    }
    if table.entries.keys().any(|k| !sampled.contains_key(k)) {
        return Err(Error::InvalidParams("Fourier check grid too small to contain the table".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut reconstruct_error = 0.0f64;
    for _ in 0..n_points {
        let x = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let r = table.reconstruct(x, lat);
        let v = assemble_v(x, p).to_array();
        for a in 0..2 {
            for b in 0..2 {
                reconstruct_error = reconstruct_error.max((r[a][b] - v[a][b]).norm());
            }
        }
    }
    Ok(FourierCheck { grid, n_points, table_error, reconstruct_error })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryCheck {
    pub name: &'static str,
    pub max_defect: f64,
}

/// Largest violation of each pointwise identity of V over seeded random points in [−3, 3]²:
/// rotation invariance of V↑, V↓ and T; V↑(−x) = V↓(x); T(−x) = T(x)*; periodicity in v1
/// and in v2; Hermiticity of the assembled matrix.
pub fn symmetry_suite(p: &ModelParams, lat: &Lattice, n_points: usize, seed: u64) -> Vec<SymmetryCheck> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mat_diff = |a: [[C64; 2]; 2], b: [[C64; 2]; 2]| {
        (0..4).map(|t| (a[t / 2][t % 2] - b[t / 2][t % 2]).norm()).fold(0.0, f64::max)
    };
    let mut d = [0.0f64; 6];
    for _ in 0..n_points {
        let x = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let (up, down) = eval_intralayer(x, p.phi);
        let (rup, rdown) = eval_intralayer(rotate(x), p.phi);
        let rot = (rup - up).abs().max((rdown - down).abs()).max((eval_t(rotate(x)) - eval_t(x)).norm());
        let (mup, _) = eval_intralayer(-x, p.phi);
        let v = assemble_v(x, p).to_array();
        let herm = (v[0][1] - v[1][0].conj()).norm().max(v[0][0].im.abs()).max(v[1][1].im.abs());
        let checks = [
            rot,
            (mup - down).abs(),
            (eval_t(-x) - eval_t(x).conj()).norm(),
            mat_diff(assemble_v(x + lat.v1, p).to_array(), v),
            mat_diff(assemble_v(x + lat.v2, p).to_array(), v),
            herm,
        ];
        for (m, c) in d.iter_mut().zip(checks) {
            *m = m.max(c);
        }
    }
    ["rotation", "parity swap", "T conjugation", "periodicity v1", "periodicity v2", "hermiticity"]
        .into_iter()
        .zip(d)
        .map(|(name, max_defect)| SymmetryCheck { name, max_defect })
        .collect()
}

/// Landscape sample on a fundamental-cell grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LandscapePoint {
    pub x: Vec2,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

/// λ± at x = (i/n) v1 + (j/n) v2, i-major.
pub fn landscape(p: &ModelParams, lat: &Lattice, n: usize, mode: EigMode) -> Result<Vec<LandscapePoint>> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = lat.real_point(i as f64 / n as f64, j as f64 / n as f64);
            let (lm, lp) = mode.pair(x, p)?;
            out.push(LandscapePoint { x, lambda_minus: lm, lambda_plus: lp });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct WellMinimum {
    pub location: Vec2,
    pub value: f64,
    pub hessian: [[f64; 2]; 2],
    /// Relative disagreement between Hessians at steps 1e-4 and 5e-5.
    pub richardson_rel: f64,
    pub condition: f64,
    pub positive_definite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WellAudit {
    pub minima: Vec<WellMinimum>,
    pub global_min: f64,
    /// Number of distinct global minima modulo Γ.
    pub n_global: usize,
    pub assumption1_holds: bool,
    pub gap_ok: bool,
    pub min_gap: f64,
    pub notes: Vec<String>,
}

pub const HESSIAN_STEP: f64 = 1e-4;
const MAX_CONDITION: f64 = 1e8;
const MAX_CANDIDATES: usize = 64;

/// Central-difference Hessian of `f` at `x`.
pub fn hessian_fd(f: &dyn Fn(Vec2) -> f64, x: Vec2, step: f64) -> [[f64; 2]; 2] {
    let e1 = Vec2::new(step, 0.0);
    let e2 = Vec2::new(0.0, step);
    let f0 = f(x);
    let h2 = step * step;
    let d11 = (f(x + e1) - 2.0 * f0 + f(x - e1)) / h2;
    let d22 = (f(x + e2) - 2.0 * f0 + f(x - e2)) / h2;
    let d12 = (f(x + e1 + e2) - f(x + e1 - e2) - f(x - e1 + e2) + f(x - e1 - e2)) / (4.0 * h2);
    [[d11, d12], [d12, d22]]
}

/// Hessian from steps `HESSIAN_STEP` and half of it, combined to cancel the O(step²) term,
/// plus the relative disagreement of the two raw estimates.
pub fn hessian_checked(f: &dyn Fn(Vec2) -> f64, x: Vec2) -> ([[f64; 2]; 2], f64) {
    let a = hessian_fd(f, x, HESSIAN_STEP);
    let b = hessian_fd(f, x, 0.5 * HESSIAN_STEP);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let diff = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (4.0 * b[i][j] - a[i][j]) / 3.0;
        }
    }
    (out, diff / scale)
}

/// Eigen-decomposition of a symmetric 2×2 matrix: (values, unit eigenvectors as columns).
pub fn sym2_eig(m: [[f64; 2]; 2]) -> ([f64; 2], [Vec2; 2]) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    let (l0, l1) = (mean - r, mean + r);
    let vec_for = |l: f64| {
        let v = if (a - l).abs() > (d - l).abs() { Vec2::new(-b, a - l) } else { Vec2::new(d - l, -b) };
        let n = v.norm();
        if n == 0.0 {
            if a <= d {
                if l == l0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) }
            } else if l == l0 {
                Vec2::new(0.0, 1.0)
            } else {
                Vec2::new(1.0, 0.0)
            }
        } else {
            (1.0 / n) * v
        }
    };
    ([l0, l1], [vec_for(l0), vec_for(l1)])
}

/// Derivative-free Nelder–Mead descent in the plane; stops once the simplex diameter drops below `tol`.
pub fn nelder_mead(f: &dyn Fn(Vec2) -> f64, start: Vec2, scale: f64, tol: f64, max_iter: usize) -> (Vec2, f64) {
    let mut s = [start, start + Vec2::new(scale, 0.0), start + Vec2::new(0.0, scale)];
    let mut v = s.map(f);
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = order.map(|i| s[i]);
        v = order.map(|i| v[i]);
        let diam = (s[1] - s[0]).norm().max((s[2] - s[0]).norm());
        if diam < tol {
            break;
        }
        let c = 0.5 * (s[0] + s[1]);
        let xr = c + (c - s[2]);
        let fr = f(xr);
        if fr < v[0] {
            let xe = c + 2.0 * (c - s[2]);
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                v[2] = fe;
            } else {
                s[2] = xr;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = xr;
            v[2] = fr;
        } else {
            let (xc, fc) = if fr < v[2] {
                let xc = c + 0.5 * (xr - c);
                (xc, f(xc))
            } else {
                let xc = c + 0.5 * (s[2] - c);
                (xc, f(xc))
            };
            if fc < v[2].min(fr) {
                s[2] = xc;
                v[2] = fc;
            } else {
                for i in 1..3 {
                    s[i] = s[0] + 0.5 * (s[i] - s[0]);
                    v[i] = f(s[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    (s[best], v[best])
}

/// Scan λ₋ over the fundamental cell, refine local minima and decide Assumption 1
/// (0 is the unique non-degenerate global minimum modulo Γ).
pub fn wells_audit(p: &ModelParams, lat: &Lattice, grid_n: usize, mode: EigMode) -> Result<WellAudit> {
    if grid_n < 64 {
        return Err(Error::InvalidParams(format!("wells audit grid must be at least 64, got {grid_n}")));
    }
    mode.lambda_minus(Vec2::ZERO, p)?;
    let f = |x: Vec2| mode.lambda_minus(x, p).unwrap_or(f64::NAN);

    let n = grid_n;
    let mut vals = vec![0.0; n * n];
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let x = lat.real_point(i as f64 / n as f64, j as f64 / n as f64);
            let (lm, lp) = mode.pair(x, p)?;
            vals[i * n + j] = lm;
            min_gap = min_gap.min(lp - lm);
        }
    }

    let at = |i: isize, j: isize| vals[(i.rem_euclid(n as isize) as usize) * n + j.rem_euclid(n as isize) as usize];
    let mut candidates = Vec::new();
    for i in 0..n as isize {
        for j in 0..n as isize {
            let v = at(i, j);
            let is_min = (-1..=1)
                .flat_map(|a| (-1..=1).map(move |b| (a, b)))
                .filter(|&(a, b)| (a, b) != (0, 0))
                .all(|(a, b)| v <= at(i + a, j + b));
            if is_min {
                candidates.push((v, i as usize, j as usize));
            }
        }
    }
    let mut notes = Vec::new();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    if candidates.len() > MAX_CANDIDATES {
        notes.push(format!(
            "{} grid minima (plateau); refining the lowest {}",
            candidates.len(),
            MAX_CANDIDATES
        ));
        candidates.truncate(MAX_CANDIDATES);
    }

    let spacing = lat.v1.norm() / n as f64;
    let mut minima: Vec<WellMinimum> = Vec::new();
    for &(_, i, j) in &candidates {
        let start = lat.real_point(i as f64 / n as f64, j as f64 / n as f64);
        let (xm, vm) = nelder_mead(&f, start, spacing, 1e-10, 4000);
        let loc = lat.reduce_real(xm);
        if minima.iter().any(|m| lat.distance_to_lattice(m.location - loc) < 1e-6) {
            continue;
        }
        let (hess, rel) = hessian_checked(&f, xm);
        let (ev, _) = sym2_eig(hess);
        let positive_definite = ev[0] > 0.0;
        let condition = if ev[0] > 0.0 { ev[1] / ev[0] } else { f64::INFINITY };
        // snap near-lattice points to the lattice point itself
        let location = if lat.distance_to_lattice(loc) < 1e-6 { lat.reduce_real(Vec2::ZERO) } else { loc };
        minima.push(WellMinimum { location, value: vm, hessian: hess, richardson_rel: rel, condition, positive_definite });
    }
    minima.sort_by(|a, b| a.value.total_cmp(&b.value));

    let global_min = minima.first().map(|m| m.value).unwrap_or(f64::NAN);
    let tol = 1e-8 * global_min.abs().max(1.0);
    let globals: Vec<&WellMinimum> = minima.iter().filter(|m| m.value <= global_min + tol).collect();
    let n_global = globals.len();
    let gap_ok = min_gap > 0.0;

    let mut assumption1_holds = true;
    if n_global != 1 {
        assumption1_holds = false;
        notes.push(format!("{n_global} distinct global minima per cell"));
    }
    if let Some(g) = globals.first() {
        if lat.distance_to_lattice(g.location) > 2.0 * spacing {
            assumption1_holds = false;
            notes.push(format!("global minimum at {} is not a lattice point", g.location));
        }
        if !g.positive_definite || g.condition > MAX_CONDITION {
            assumption1_holds = false;
            notes.push(format!("degenerate Hessian at global minimum (condition {:e})", g.condition));
        }
        if g.richardson_rel > 1e-4 {
            notes.push(format!("Hessian step check disagreement {:e}", g.richardson_rel));
        }
    } else {
        assumption1_holds = false;
    }
    Ok(WellAudit { minima, global_min, n_global, assumption1_holds, gap_ok, min_gap, notes })
}

/// Quadratic expansion λ₋(x) ≈ m0 + c1 x1² + c2 x2² at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWell {
    pub m0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub const AUDIT_GRID: usize = 64;

/// Coefficients of the quadratic expansion of λ₋ at 0, from a finite-difference Hessian.
pub fn numeric_harmonic_data(p: &ModelParams, lat: &Lattice, mode: EigMode) -> Result<QuadraticWell> {
    let audit = wells_audit(p, lat, AUDIT_GRID, mode)?;
    if !audit.assumption1_holds {
        return Err(Error::Assumption1(audit.notes.join("; ")));
    }
    let f = |x: Vec2| mode.lambda_minus(x, p).unwrap_or(f64::NAN);
    Ok(quadratic_coefficients(&f))
}

/// (m0, c1, c2) of `f` at the origin; c1 belongs to the principal axis closest to x1.
pub fn quadratic_coefficients(f: &dyn Fn(Vec2) -> f64) -> QuadraticWell {
    let (hess, _) = hessian_checked(f, Vec2::ZERO);
    let (ev, vecs) = sym2_eig(hess);
    let (c1, c2) = if vecs[0].x.abs() >= vecs[0].y.abs() { (ev[0], ev[1]) } else { (ev[1], ev[0]) };
    QuadraticWell { m0: f(Vec2::ZERO), c1: 0.5 * c1, c2: 0.5 * c2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p0() -> ModelParams {
        ModelParams::p0(0.05)
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))).collect()
    }

    fn mat_close(a: [[C64; 2]; 2], b: [[C64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() < tol))
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0, -1.0).unwrap_err().to_string().contains("h must be positive"));
        assert!(ModelParams::new(1.0, 1.0, f64::NAN, 1.0, 0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 7.0, 0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0, 0.1).is_ok());
    }

    #[test]
    fn intralayer_at_origin() {
        for phi in [0.0, 1.0, 4.0 * PI / 3.0] {
            let (u, d) = eval_intralayer(Vec2::ZERO, phi);
            assert!((u - 6.0 * phi.cos()).abs() < 1e-14);
            assert!((d - 6.0 * phi.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn intralayer_rotated_sum_form() {
        let phi = 0.7;
        for x in random_points(100, 1) {
            let (mut up, mut down) = (0.0, 0.0);
            for q in intralayer_momenta() {
                up += 2.0 * (q.dot(x) + phi).cos();
                down += 2.0 * (q.dot(x) - phi).cos();
            }
            let (u, d) = eval_intralayer(x, phi);
            assert!((u - up).abs() < 1e-13 && (d - down).abs() < 1e-13);
        }
    }

    #[test]
    fn parity_swap_and_t_conjugation() {
        for x in random_points(100, 2) {
            let (u, d) = eval_intralayer(x, 1.3);
            let (um, dm) = eval_intralayer(-x, 1.3);
            assert!((um - d).abs() < 1e-12 && (dm - u).abs() < 1e-12);
            assert!((eval_t(-x) - eval_t(x).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn t_values() {
        assert!((eval_t(Vec2::ZERO) - C64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((eval_t(Vec2::new(0.0, 0.5)) - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn assemble_examples() {
        let v = assemble_v(Vec2::ZERO, &p0());
        assert!(mat_close(
            v.to_array(),
            [[C64::new(-3.0, 0.0), C64::new(3.0, 0.0)], [C64::new(3.0, 0.0), C64::new(-3.0, 0.0)]],
            1e-14
        ));
        let p = ModelParams { alpha: 0.0, beta: 0.0, u: 1.5, ..p0() };
        for x in random_points(10, 3) {
            let v = assemble_v(x, &p);
            assert_eq!((v.a, v.d, v.b), (0.75, -0.75, C64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn exact_eigs() {
        let (lm, lp) = eigs_exact(Vec2::ZERO, &p0());
        assert!((lm + 6.0).abs() < 1e-14 && lp.abs() < 1e-14);
        // generic 2x2 Hermitian oracle: roots of the characteristic polynomial
        let p = ModelParams { u: 0.8, beta: 2.0, alpha: 1.3, ..p0() };
        for x in random_points(200, 4) {
            let v = assemble_v(x, &p);
            let tr = v.a + v.d;
            let det = v.a * v.d - v.b.norm_sqr();
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            let (lm, lp) = eigs_exact(x, &p);
            assert!(lm <= lp);
            assert!((lm - 0.5 * (tr - disc)).abs() < 1e-12);
            assert!((lp - 0.5 * (tr + disc)).abs() < 1e-12);
        }
    }

    #[test]
    fn papermode_values() {
        let (lm, _) = eigs_papermode(Vec2::ZERO, &p0()).unwrap();
        assert!((lm + 4.5).abs() < 1e-14);
        let p = ModelParams { beta: 5.0, u: 2.0, ..p0() };
        let (lm, _) = eigs_papermode(Vec2::ZERO, &p).unwrap();
        assert!((lm - (-3.0 - 229f64.sqrt() / 2.0)).abs() < 1e-13);
        let bad = ModelParams { alpha: 2.0, ..p0() };
        assert!(matches!(eigs_papermode(Vec2::ZERO, &bad), Err(Error::PaperModeAlpha(_))));
        for x in random_points(50, 5) {
            let (a, b) = eigs_papermode(x, &p).unwrap();
            assert!(b >= a);
        }
    }

    #[test]
    fn discrepancy_factor_two() {
        for beta in [0.5, 1.0, 3.0] {
            let d = mode_discrepancy(&ModelParams { beta, ..p0() }).unwrap();
            assert!((d.exact_gap - 6.0 * beta).abs() < 1e-12);
            assert!((d.paper_gap - 3.0 * beta).abs() < 1e-12);
            assert!((d.ratio - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_support_and_symmetry() {
        let lat = build_lattice();
        let t = fourier_table(&ModelParams { u: 0.4, ..p0() }, &lat);
        assert!(t.len() <= 13);
        for (&(m, n), c) in &t.entries {
            let cm = t.get((-m, -n)).expect("table closed under g -> -g");
            for i in 0..2 {
                for j in 0..2 {
                    assert!((cm[i][j] - c[j][i].conj()).norm() < 1e-14);
                }
            }
        }
        let empty = fourier_table(&ModelParams { alpha: 0.0, beta: 0.0, u: 0.0, ..p0() }, &lat);
        assert_eq!(empty.len(), 1);
        assert!(empty.get((0, 0)).unwrap().iter().flatten().all(|c| *c == C64::new(0.0, 0.0)));
    }

    #[test]
    fn fourier_reconstruction() {
        let lat = build_lattice();
        let p = ModelParams { alpha: 0.9, beta: 1.7, u: -0.6, phi: 2.1, h: 0.1 };
        let t = fourier_table(&p, &lat);
        for x in random_points(100, 6) {
            assert!(mat_close(t.reconstruct(x, &lat), assemble_v(x, &p).to_array(), 1e-12));
        }
    }

    #[test]
    fn direct_dft_check() {
        let lat = build_lattice();
        for p in [ModelParams::p0(0.1), ModelParams { u: 1.3, beta: 0.7, phi: 0.4, ..ModelParams::p0(0.1) }] {
            let c = fourier_check(&p, &lat, 16, 100, 3).unwrap();
            assert!(c.table_error < 1e-12 && c.reconstruct_error < 1e-12, "{c:?}");
        }
        assert!(fourier_check(&ModelParams::p0(0.1), &lat, 4, 10, 3).is_err());
    }

    #[test]
    fn symmetry_suite_results() {
        let lat = build_lattice();
        let r = symmetry_suite(&ModelParams { u: 0.7, ..ModelParams::p0(0.1) }, &lat, 1000, 5);
        assert_eq!(r.len(), 6);
        for c in &r[1..] {
            assert!(c.max_defect < 1e-12, "{c:?}");
        }
        // V↑ and V↓ are R-invariant but T is not, so the combined rotation check fails
        assert!(r[0].max_defect > 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let (a, b) = eval_intralayer(x, 1.1);
            let (c, d) = eval_intralayer(rotate(x), 1.1);
            assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_chart() {
        assert_eq!(to_numeric_coords(Vec2::ZERO), Vec2::ZERO);
        assert_eq!(from_numeric_coords(Vec2::ZERO), Vec2::ZERO);
        for x in random_points(100, 7) {
            assert!((from_numeric_coords(to_numeric_coords(x)) - x).norm() < 1e-13);
            let y = to_numeric_coords(x);
            assert!((to_numeric_coords(from_numeric_coords(y)) - y).norm() < 1e-12);
            let (a, b) = numeric_intralayer(y, 0.9);
            let (c, d) = eval_intralayer(from_numeric_coords(y), 0.9);
            assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_minus_even_in_x2() {
        let p = ModelParams { u: 1.1, ..p0() };
        for x in random_points(100, 8) {
            let a = eigs_exact(x, &p).0;
            let b = eigs_exact(Vec2::new(x.x, -x.y), &p).0;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn audit_p0_single_well() {
        let lat = build_lattice();
        let a = wells_audit(&p0(), &lat, 64, EigMode::Exact).unwrap();
        assert!(a.assumption1_holds, "{:?}", a.notes);
        assert!(a.gap_ok);
        let g = &a.minima[0];
        assert!(lat.distance_to_lattice(g.location) < 1e-9);
        assert!(g.positive_definite);
        assert!(g.hessian[0][1].abs() < 1e-8);
    }

    #[test]
    fn audit_off_origin_fails() {
        let lat = build_lattice();
        let p = ModelParams { phi: 1.32, ..p0() };
        let a = wells_audit(&p, &lat, 64, EigMode::Exact).unwrap();
        assert!(!a.assumption1_holds);
        assert!(a.n_global > 1, "{:?}", a.notes);
    }

    #[test]
    fn audit_phi_194_several_wells() {
        // three wells per cell; the true λ₋ keeps its deepest at the origin,
        // while the printed closed form moves it off the lattice
        let lat = build_lattice();
        let p = ModelParams { phi: 1.94, ..p0() };
        let a = wells_audit(&p, &lat, 64, EigMode::Exact).unwrap();
        assert_eq!(a.minima.len(), 3);
        assert!(a.assumption1_holds);
        let b = wells_audit(&p, &lat, 64, EigMode::Paper).unwrap();
        assert!(!b.assumption1_holds);
        assert_eq!(b.n_global, 2);
    }

    #[test]
    fn audit_rejects_coarse_grid() {
        assert!(wells_audit(&p0(), &build_lattice(), 32, EigMode::Exact).is_err());
    }

    #[test]
    fn quadratic_synthetic() {
        let f = |x: Vec2| -2.0 + 3.0 * x.x * x.x + 7.0 * x.y * x.y;
        let q = quadratic_coefficients(&f);
        assert!((q.m0 + 2.0).abs() < 1e-15);
        assert!((q.c1 - 3.0).abs() < 1e-6 && (q.c2 - 7.0).abs() < 1e-6);
        // ordering follows the axes, not the magnitudes
        let g = |x: Vec2| 9.0 * x.x * x.x + 1.0 * x.y * x.y;
        let q = quadratic_coefficients(&g);
        assert!((q.c1 - 9.0).abs() < 1e-6 && (q.c2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn numeric_coefficients_positive() {
        let lat = build_lattice();
        let q = numeric_harmonic_data(&p0(), &lat, EigMode::Exact).unwrap();
        assert!((q.m0 + 6.0).abs() < 1e-12);
        assert!(q.c1 > 0.0 && q.c2 > 0.0);
        let bad = ModelParams { phi: 1.32, ..p0() };
        assert!(matches!(numeric_harmonic_data(&bad, &lat, EigMode::Exact), Err(Error::Assumption1(_))));
    }
}
