//! Agmon distance ρ_E(x) = d_E(x, 0) in the degenerate metric (λ₋ − E)₊ dx², computed
//! as a shortest path on a Cartesian grid, and the tunnelling actions to the six
//! nearest wells.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Vec2};
use crate::potential::{eigs_exact, wells_audit, EigMode, ModelParams, AUDIT_GRID};

/// Square [−half_width, half_width]² sampled every 1/n_per_unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgmonGrid {
    pub half_width: f64,
    pub n_per_unit: usize,
    /// stencil holds every primitive step (a, b) with max(|a|, |b|) ≤ radius
    pub stencil_radius: i32,
}

impl Default for AgmonGrid {
    fn default() -> Self {
        AgmonGrid { half_width: 1.5, n_per_unit: 512, stencil_radius: 5 }
    }
}

impl AgmonGrid {
    pub fn side(&self) -> usize {
        (2.0 * self.half_width * self.n_per_unit as f64).round() as usize + 1
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n_per_unit as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let s = self.step();
        Vec2::new(-self.half_width + i as f64 * s, -self.half_width + j as f64 * s)
    }

    /// Node closest to x, if x lies in the box.
    pub fn nearest(&self, x: Vec2) -> Option<(usize, usize)> {
        let m = self.side() as f64;
        let i = ((x.x + self.half_width) * self.n_per_unit as f64).round();
        let j = ((x.y + self.half_width) * self.n_per_unit as f64).round();
        (i >= 0.0 && j >= 0.0 && i < m && j < m).then_some((i as usize, j as usize))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_unit < 4 || self.half_width <= 0.0 || self.stencil_radius < 1 {
            return Err(Error::InvalidParams("Agmon grid needs n_per_unit ≥ 4, positive extent and stencil radius ≥ 1".into()));
        }
        Ok(())
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive lattice steps within the given Chebyshev radius, sorted by angle.
pub fn stencil(radius: i32) -> Vec<(i32, i32)> {
    let mut v: Vec<(i32, i32)> = (-radius..=radius)
        .flat_map(|a| (-radius..=radius).map(move |b| (a, b)))
        .filter(|&(a, b)| (a, b) != (0, 0) && gcd(a, b) == 1)
        .collect();
    v.sort_by(|p, q| (p.1 as f64).atan2(p.0 as f64).total_cmp(&(q.1 as f64).atan2(q.0 as f64)));
    v
}

/// Worst relative overestimate of Euclidean length by the stencil's path metric.
pub fn stencil_metric_error(radius: i32) -> f64 {
    let s = stencil(radius);
    let mut gap = 0.0f64;
    for i in 0..s.len() {
        let (a, b) = (s[i], s[(i + 1) % s.len()]);
        let t0 = (a.1 as f64).atan2(a.0 as f64);
        let mut t1 = (b.1 as f64).atan2(b.0 as f64);
        if t1 <= t0 {
            t1 += 2.0 * std::f64::consts::PI;
        }
        gap = gap.max(t1 - t0);
    }
    1.0 / (0.5 * gap).cos() - 1.0
}

/// w(x) = √((λ₋(x) − E)₊) at every node, i-major.
pub fn weight_field(p: &ModelParams, e: f64, grid: &AgmonGrid) -> Vec<f64> {
    let m = grid.side();
    (0..m * m)
        .into_par_iter()
        .map(|t| {
            let lm = eigs_exact(grid.node(t / m, t % m), p).0;
            if lm > e {
                (lm - e).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Dijkstra from `source`; edge cost = step length × mean of the endpoint weights.
/// Ties are broken by node index, so the result is reproducible.
pub fn agmon_distance(weights: &[f64], grid: &AgmonGrid, source: Vec2) -> Result<Vec<f64>> {
    grid.validate()?;
    let m = grid.side();
    if weights.len() != m * m {
        return Err(Error::InvalidParams(format!("weight field has {} nodes, grid has {}", weights.len(), m * m)));
    }
    let (si, sj) = grid.nearest(source).ok_or_else(|| Error::InvalidParams(format!("source {source} outside the Agmon box")))?;
    let steps: Vec<(isize, isize, f64)> = stencil(grid.stencil_radius)
        .into_iter()
        .map(|(a, b)| (a as isize, b as isize, grid.step() * ((a * a + b * b) as f64).sqrt()))
        .collect();
    let mut rho = vec![f64::INFINITY; m * m];
    let mut done = vec![false; m * m];
    let mut heap = BinaryHeap::new();
    let s = si * m + sj;
    rho[s] = 0.0;
    heap.push(Reverse((0u64, s)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let du = f64::from_bits(bits);
        let (ui, uj) = ((u / m) as isize, (u % m) as isize);
        let wu = weights[u];
        for &(a, b, len) in &steps {
            let (vi, vj) = (ui + a, uj + b);
            if vi < 0 || vj < 0 || vi >= m as isize || vj >= m as isize {
                continue;
            }
            let v = vi as usize * m + vj as usize;
            if done[v] {
                continue;
            }
            let nd = du + len * 0.5 * (wu + weights[v]);
            if nd < rho[v] {
                rho[v] = nd;
                // non-negative floats order like their bit patterns
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    Ok(rho)
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborAction {
    /// lattice coordinates (a, b) of the well a v1 + b v2
    pub cell: (i32, i32),
    pub position: Vec2,
    pub action: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgmonField {
    pub energy: f64,
    pub grid: AgmonGrid,
    pub weight: Vec<f64>,
    pub rho: Vec<f64>,
    pub actions: Vec<NeighborAction>,
    pub s0: f64,
}

impl AgmonField {
    /// max/min − 1 over the six actions
    pub fn action_spread(&self) -> f64 {
        let mx = self.actions.iter().map(|a| a.action).fold(f64::NEG_INFINITY, f64::max);
        let mn = self.actions.iter().map(|a| a.action).fold(f64::INFINITY, f64::min);
        mx / mn - 1.0
    }

    pub fn rho_at(&self, x: Vec2) -> Option<f64> {
        self.grid.nearest(x).map(|(i, j)| self.rho[i * self.grid.side() + j])
    }
}

/// The six nearest lattice translates of the origin.
pub fn nearest_wells(lat: &Lattice) -> [((i32, i32), Vec2); 6] {
    [(1, 0), (0, 1), (-1, -1), (-1, 0), (0, -1), (1, 1)].map(|(a, b)| ((a, b), lat.real_point(a as f64, b as f64)))
}

/// Agmon field at energy E (default λ₋(0)) and the actions ρ_E(γ) for the six nearest wells γ.
pub fn tunneling_action(p: &ModelParams, energy: Option<f64>, grid: &AgmonGrid, lat: &Lattice) -> Result<AgmonField> {
    let audit = wells_audit(p, lat, AUDIT_GRID, EigMode::Exact)?;
    if !audit.assumption1_holds {
        return Err(Error::Assumption1(audit.notes.join("; ")));
    }
    let e = energy.unwrap_or_else(|| eigs_exact(Vec2::ZERO, p).0);
    let weight = weight_field(p, e, grid);
    let rho = agmon_distance(&weight, grid, Vec2::ZERO)?;
    let m = grid.side();
    let mut actions = Vec::with_capacity(6);
    for (cell, pos) in nearest_wells(lat) {
        let (i, j) = grid
            .nearest(pos)
            .ok_or_else(|| Error::InvalidParams(format!("neighbouring well {pos} lies outside the Agmon box")))?;
        actions.push(NeighborAction { cell, position: pos, action: rho[i * m + j] });
    }
    let s0 = actions.iter().map(|a| a.action).fold(f64::INFINITY, f64::min);
    Ok(AgmonField { energy: e, grid: *grid, weight, rho, actions, s0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> AgmonGrid {
        AgmonGrid { half_width: 1.5, n_per_unit: 48, stencil_radius: 5 }
    }

    #[test]
    fn stencil_shape() {
        assert_eq!(stencil(1).len(), 8);
        assert_eq!(stencil(2).len(), 16);
        assert!(stencil(5).iter().all(|&(a, b)| gcd(a, b) == 1));
        // 16 directions: largest gap atan(1/2) ≈ 26.6°, error ≈ 2.75%
        assert!((stencil_metric_error(2) - 0.02748).abs() < 1e-4);
        assert!(stencil_metric_error(5) < 0.006);
    }

    #[test]
    fn zero_weight_zero_distance() {
        let g = small();
        let m = g.side();
        let rho = agmon_distance(&vec![0.0; m * m], &g, Vec2::ZERO).unwrap();
        assert!(rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn constant_weight_is_scaled_euclidean() {
        let g = AgmonGrid { n_per_unit: 64, ..small() };
        let m = g.side();
        let w0 = 1.7;
        let rho = agmon_distance(&vec![w0; m * m], &g, Vec2::ZERO).unwrap();
        let bound = stencil_metric_error(g.stencil_radius);
        let mut worst = 0.0f64;
        for t in 0..m * m {
            let x = g.node(t / m, t % m);
            let r = x.norm();
            if r > 0.25 {
                let rel = rho[t] / (w0 * r) - 1.0;
                assert!(rel >= -1e-12);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= bound + 1e-12, "{worst} > {bound}");
        assert!(worst < 0.006);
    }

    #[test]
    fn weight_spot_values() {
        let lat = build_lattice();
        let p = ModelParams::p0(0.1);
        let g = small();
        let e0 = eigs_exact(Vec2::ZERO, &p).0;
        let w = weight_field(&p, e0, &g);
        let m = g.side();
        let (i, j) = g.nearest(Vec2::ZERO).unwrap();
        assert_eq!(w[i * m + j], 0.0);
        let (i, j) = g.nearest(Vec2::new(0.0, 0.5)).unwrap();
        let want = (eigs_exact(Vec2::new(0.0, 0.5), &p).0 - e0).sqrt();
        assert!((w[i * m + j] - want).abs() < 1e-14);
        assert!(weight_field(&p, 100.0, &g).iter().all(|&v| v == 0.0));
        let _ = lat;
    }

    #[test]
    fn rho_basic_properties() {
        let lat = build_lattice();
        let p = ModelParams::p0(0.1);
        let g = small();
        let f = tunneling_action(&p, None, &g, &lat).unwrap();
        assert_eq!(f.rho_at(Vec2::ZERO), Some(0.0));
        assert!(f.rho.iter().all(|&r| r >= 0.0 && r.is_finite()));
        assert!(f.s0 > 0.0);
        // triangle inequality through an intermediate node, up to the discretisation slack
        let m = g.side();
        let wmax = f.weight.iter().cloned().fold(0.0, f64::max);
        let slack = 2.0 * g.step() * wmax;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let y = g.node(rng.gen_range(0..m), rng.gen_range(0..m));
            let ry = agmon_distance(&f.weight, &g, y).unwrap();
            for _ in 0..20 {
                let t = rng.gen_range(0..m * m);
                let (yi, yj) = g.nearest(y).unwrap();
                assert!(f.rho[t] <= f.rho[yi * m + yj] + ry[t] + slack);
            }
        }
    }

    #[test]
    fn monotone_in_energy() {
        let lat = build_lattice();
        let p = ModelParams::p0(0.1);
        let g = small();
        let a = tunneling_action(&p, None, &g, &lat).unwrap();
        let b = tunneling_action(&p, Some(a.energy + 0.1), &g, &lat).unwrap();
        assert!(b.s0 < a.s0);
        assert!(a.rho.iter().zip(&b.rho).all(|(x, y)| x >= y));
    }

    #[test]
    fn refinement_converges() {
        let lat = build_lattice();
        let p = ModelParams::p0(0.1);
        let s0: Vec<f64> = [24, 48, 96]
            .iter()
            .map(|&n| tunneling_action(&p, None, &AgmonGrid { n_per_unit: n, ..small() }, &lat).unwrap().s0)
            .collect();
        assert!((s0[1] - s0[2]).abs() < (s0[0] - s0[1]).abs());
    }

    #[test]
    fn parity_symmetric() {
        let lat = build_lattice();
        let g = small();
        let f = tunneling_action(&ModelParams::p0(0.1), None, &g, &lat).unwrap();
        let m = g.side();
        for t in 0..m * m {
            assert!((f.rho[t] - f.rho[m * m - 1 - t]).abs() <= 1e-12 * (1.0 + f.rho[t]));
        }
        // actions pair up under γ ↦ −γ
        for k in 0..3 {
            assert!((f.actions[k].action - f.actions[k + 3].action).abs() < 1e-12);
        }
    }

    #[test]
    fn requires_single_well() {
        let lat = build_lattice();
        let p = ModelParams { phi: 1.32, ..ModelParams::p0(0.1) };
        assert!(matches!(tunneling_action(&p, None, &small(), &lat), Err(Error::Assumption1(_))));
    }
}
