//! Hexagonal moiré lattice, its dual, Brillouin-zone grids and k-paths.
//!
//! Lengths are in moiré units: the nearest-neighbor distance between wells is 1.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Counter-clockwise rotation by 2π/3.
pub fn rotate(v: Vec2) -> Vec2 {
    Vec2::new(-0.5 * v.x - 0.5 * SQRT3 * v.y, 0.5 * SQRT3 * v.x - 0.5 * v.y)
}

/// Moiré lattice Γ = v1 Z + v2 Z together with the dual lattice Γ*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub v1: Vec2,
    pub v2: Vec2,
    pub g1: Vec2,
    pub g2: Vec2,
    /// The six lattice vectors of unit length, ordered by polar angle.
    pub neighbor_shell: [Vec2; 6],
}

impl Default for Lattice {
    fn default() -> Self {
        build_lattice()
    }
}

pub fn build_lattice() -> Lattice {
    let v1 = Vec2::new(-0.5 * SQRT3, -0.5);
    let v2 = Vec2::new(0.5 * SQRT3, -0.5);
    // Solve <v_i, g_j> = 2π δ_ij, i.e. G = 2π (V^T)^{-1} with V = [v1 v2].
    let det = v1.x * v2.y - v2.x * v1.y;
    let g1 = (2.0 * PI / det) * Vec2::new(v2.y, -v2.x);
    let g2 = (2.0 * PI / det) * Vec2::new(-v1.y, v1.x);

    let v3 = v1 + v2;
    let mut shell = [v1, -v1, v2, -v2, v3, -v3];
    shell.sort_by(|a, b| angle(*a).total_cmp(&angle(*b)));
    Lattice { v1, v2, g1, g2, neighbor_shell: shell }
}

fn angle(v: Vec2) -> f64 {
    let a = v.y.atan2(v.x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

impl Lattice {
    /// Real-space point from fractional coordinates along v1, v2.
    pub fn real_point(&self, s: f64, t: f64) -> Vec2 {
        s * self.v1 + t * self.v2
    }

    /// Fractional coordinates (s, t) with x = s v1 + t v2.
    pub fn real_frac(&self, x: Vec2) -> (f64, f64) {
        (x.dot(self.g1) / (2.0 * PI), x.dot(self.g2) / (2.0 * PI))
    }

    pub fn dual_point(&self, m: f64, n: f64) -> Vec2 {
        m * self.g1 + n * self.g2
    }

    /// Fractional coordinates (m, n) with k = m g1 + n g2.
    pub fn dual_frac(&self, k: Vec2) -> (f64, f64) {
        (k.dot(self.v1) / (2.0 * PI), k.dot(self.v2) / (2.0 * PI))
    }

    /// Integer coordinates of a dual-lattice vector, if `k` is one (within `tol`).
    pub fn dual_index(&self, k: Vec2, tol: f64) -> Option<(i32, i32)> {
        let (m, n) = self.dual_frac(k);
        let (mr, nr) = (m.round(), n.round());
        ((m - mr).abs() < tol && (n - nr).abs() < tol).then_some((mr as i32, nr as i32))
    }

    /// Integer coordinates of a real-space lattice vector, if `x` is one.
    pub fn real_index(&self, x: Vec2, tol: f64) -> Option<(i32, i32)> {
        let (s, t) = self.real_frac(x);
        let (sr, tr) = (s.round(), t.round());
        ((s - sr).abs() < tol && (t - tr).abs() < tol).then_some((sr as i32, tr as i32))
    }

    /// Image of `x` in the fundamental cell {s v1 + t v2 : s, t in [0, 1)}.
    pub fn reduce_real(&self, x: Vec2) -> Vec2 {
        let (s, t) = self.real_frac(x);
        self.real_point(s - s.floor(), t - t.floor())
    }

    /// Distance from `x` to the nearest lattice point.
    pub fn distance_to_lattice(&self, x: Vec2) -> f64 {
        let r = self.reduce_real(x);
        let mut best = f64::INFINITY;
        for a in -1..=2 {
            for b in -1..=2 {
                let d = (r - self.real_point(a as f64, b as f64)).norm();
                best = best.min(d);
            }
        }
        best
    }

    /// Matrix of the rotation R in the basis (b1, b2): R b_j = sum_i M[i][j] b_i.
    /// Returns the rounded integer matrix and the largest rounding residual.
    pub fn rotation_in_basis(&self, b1: Vec2, b2: Vec2) -> ([[i32; 2]; 2], f64) {
        let det = b1.x * b2.y - b2.x * b1.y;
        let coords = |v: Vec2| {
            (
                (v.x * b2.y - b2.x * v.y) / det,
                (b1.x * v.y - v.x * b1.y) / det,
            )
        };
        let mut m = [[0; 2]; 2];
        let mut resid: f64 = 0.0;
        for (j, b) in [b1, b2].into_iter().enumerate() {
            let (c0, c1) = coords(rotate(b));
            for (i, c) in [c0, c1].into_iter().enumerate() {
                m[i][j] = c.round() as i32;
                resid = resid.max((c - c.round()).abs());
            }
        }
        (m, resid)
    }

    pub fn high_symmetry(&self, label: HighSym) -> Vec2 {
        match label {
            HighSym::Gamma => Vec2::ZERO,
            HighSym::K => (1.0 / 3.0) * (self.g1 + 2.0 * self.g2),
            HighSym::M => 0.5 * (self.g1 + self.g2),
        }
    }
}

/// k − m g1 − n g2 with integers m, n chosen so the fractional coordinates lie in [0, 1).
pub fn reduce_to_cell(k: Vec2, lat: &Lattice) -> Vec2 {
    let (m, n) = lat.dual_frac(k);
    let (fm, fn_) = (m - m.floor(), n - n.floor());
    // rounding can push a coordinate of exactly 1 - eps up to 1.0
    let wrap = |f: f64| if f >= 1.0 { 0.0 } else { f };
    lat.dual_point(wrap(fm), wrap(fn_))
}

/// Uniform fractional grid k = (i/n1) g1 + (j/n2) g2, i-major ordering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub n1: usize,
    pub n2: usize,
    pub points: Vec<Vec2>,
}

impl KGrid {
    pub fn new(n1: usize, n2: usize, lat: &Lattice) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParams("k-grid subdivisions must be positive".into()));
        }
        let mut points = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                points.push(lat.dual_point(i as f64 / n1 as f64, j as f64 / n2 as f64));
            }
        }
        Ok(KGrid { n1, n2, points })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        (i % self.n1) * self.n2 + (j % self.n2)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HighSym {
    Gamma,
    K,
    M,
}

impl HighSym {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "G" | "Γ" | "Gamma" | "GAMMA" | "gamma" => Ok(HighSym::Gamma),
            "K" | "k" => Ok(HighSym::K),
            "M" | "m" => Ok(HighSym::M),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            HighSym::Gamma => "G",
            HighSym::K => "K",
            HighSym::M => "M",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPath {
    pub labels: Vec<HighSym>,
    pub points: Vec<Vec2>,
    pub arclength: Vec<f64>,
    /// Index into `points` of each labeled vertex.
    pub vertex_index: Vec<usize>,
}

impl KPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Piecewise-linear path through labeled points, `n_per_segment` equal steps per segment.
///
/// A path with `s` segments has `s * n_per_segment + 1` points and every vertex is hit exactly.
pub fn kpath(labels: &[&str], n_per_segment: usize, lat: &Lattice) -> Result<KPath> {
    let labels = labels
        .iter()
        .map(|l| HighSym::parse(l))
        .collect::<Result<Vec<_>>>()?;
    if labels.len() < 2 {
        return Err(Error::InvalidParams("a k-path needs at least two labels".into()));
    }
    if n_per_segment == 0 {
        return Err(Error::InvalidParams("n_per_segment must be positive".into()));
    }
    let verts: Vec<Vec2> = labels.iter().map(|&l| lat.high_symmetry(l)).collect();
    let mut points = Vec::with_capacity((verts.len() - 1) * n_per_segment + 1);
    let mut vertex_index = vec![0];
    for w in verts.windows(2) {
        let (a, b) = (w[0], w[1]);
        for j in 0..n_per_segment {
            let t = j as f64 / n_per_segment as f64;
            points.push(a + t * (b - a));
        }
        vertex_index.push(points.len());
    }
    points.push(*verts.last().unwrap());

    let mut arclength = Vec::with_capacity(points.len());
    let mut s = 0.0;
    arclength.push(0.0);
    for w in points.windows(2) {
        s += (w[1] - w[0]).norm();
        arclength.push(s);
    }
    Ok(KPath { labels, points, arclength, vertex_index })
}
