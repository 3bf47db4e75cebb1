use std::f64::consts::PI;

use moire_core::blochpw::{fiber_eigs, PlaneWaveBasis};
use moire_core::potential::{assemble_v, fourier_table};
use moire_core::{build_lattice, ModelParams, Vec2};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.2..2.0f64, 0.0..3.0f64, -2.0..2.0f64, 0.0..2.0 * PI).prop_map(|(alpha, beta, u, phi)| ModelParams { alpha, beta, u, phi, h: 0.1 })
}

#[test]
fn dual_basis() {
    let lat = build_lattice();
    for (v, g, want) in [(lat.v1, lat.g1, 2.0 * PI), (lat.v1, lat.g2, 0.0), (lat.v2, lat.g1, 0.0), (lat.v2, lat.g2, 2.0 * PI)] {
        assert!((v.dot(g) - want).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_hermitian_and_periodic(p in params(), s in -2.0..2.0f64, t in -2.0..2.0f64, m in -3i32..3, n in -3i32..3) {
        let lat = build_lattice();
        let x = lat.real_point(s, t);
        let v = assemble_v(x, &p).to_array();
        let w = assemble_v(x + lat.real_point(m as f64, n as f64), &p).to_array();
        prop_assert!((v[0][1] - v[1][0].conj()).norm() < 1e-12);
        prop_assert!(v[0][0].im.abs() < 1e-12 && v[1][1].im.abs() < 1e-12);
        for a in 0..2 {
            for b in 0..2 {
                prop_assert!((v[a][b] - w[a][b]).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn table_reconstructs_potential(p in params(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let lat = build_lattice();
        let r = fourier_table(&p, &lat).reconstruct(Vec2::new(x, y), &lat);
        let v = assemble_v(Vec2::new(x, y), &p).to_array();
        for a in 0..2 {
            for b in 0..2 {
                prop_assert!((r[a][b] - v[a][b]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_u_spectrum_is_even_in_k(p in params(), m in 0.0..1.0f64, n in 0.0..1.0f64) {
        let lat = build_lattice();
        let p = ModelParams { u: 0.0, h: 0.3, ..p };
        let basis = PlaneWaveBasis::new(4.0, &lat).unwrap();
        let table = fourier_table(&p, &lat);
        let k = lat.dual_point(m, n);
        let a = fiber_eigs(&p, k, &basis, &table, 6).unwrap().values;
        let b = fiber_eigs(&p, -k, &basis, &table, 6).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
