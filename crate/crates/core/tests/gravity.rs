use blcirk::gravity::{legendre_norm, GravityModel, MU_EARTH, R_EARTH};
use blcirk::orbit::synthetic_model;
use blcirk::quadrature::gauss_legendre_rule;
use proptest::prelude::*;

fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn point(r: f64, lat: f64, lon: f64) -> [f64; 3] {
    [r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin()]
}

#[test]
fn shipped_files_load() {
    let g = GravityModel::load_file(data("egm96_deg2.txt")).unwrap();
    assert_eq!(g, GravityModel::egm96_degree2());
    let s = GravityModel::load_file(data("synthetic_deg8.txt")).unwrap();
    assert_eq!(s.n_max, 8);
    let want = synthetic_model(8);
    for n in 2..=8 {
        for m in 0..=n {
            assert!((s.c(n, m) - want.c(n, m)).abs() <= 1e-16 * want.c(n, m).abs());
            assert!((s.s(n, m) - want.s(n, m)).abs() <= 1e-16 * want.s(n, m).abs());
        }
    }
}

#[test]
fn text_round_trip() {
    let g = synthetic_model(8);
    let back = GravityModel::load(g.to_text().as_bytes()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn malformed_files() {
    assert!(GravityModel::load("".as_bytes()).is_err());
    assert!(GravityModel::load("# only a comment\n".as_bytes()).is_err());
    assert!(GravityModel::load("398600 6378\n".as_bytes()).is_err());
    assert!(GravityModel::load("-1 6378 2\n".as_bytes()).is_err());
    assert!(GravityModel::load("398600 6378 2\n2 0 1.0\n".as_bytes()).is_err());
    assert!(GravityModel::load("398600 6378 2\n3 0 1.0 0.0\n".as_bytes()).is_err());
    assert!(GravityModel::load_file(data("does_not_exist.txt")).is_err());
}

#[test]
fn equatorial_j2_closed_form() {
    let g = GravityModel::egm96_degree2().truncated(2);
    let mut zonal = GravityModel::new(MU_EARTH, R_EARTH, 2).unwrap();
    zonal.set(2, 0, g.c(2, 0), 0.0).unwrap();
    let c20 = g.c(2, 0);
    let p20 = -(5f64.sqrt()) / 2.0;
    for r in [6700.0, 7000.0, 42164.0] {
        let x = [r, 0.0, 0.0];
        let q = (R_EARTH / r).powi(2);
        let v = MU_EARTH / r * (1.0 + q * c20 * p20);
        assert!((zonal.potential(x, 2).unwrap() - v).abs() < 1e-14 * v);
        let a = zonal.acceleration(x, 2).unwrap();
        let ar = -MU_EARTH / (r * r) * (1.0 + 3.0 * q * c20 * p20);
        assert!((a[0] - ar).abs() < 1e-14 * ar.abs());
        assert!(a[1].abs() < 1e-20 && a[2].abs() < 1e-20);
    }
}

#[test]
fn far_field_is_point_mass() {
    let g = synthetic_model(8);
    let x = point(1e6 * R_EARTH, 0.4, 1.1);
    let r = 1e6 * R_EARTH;
    let v = g.potential(x, 8).unwrap();
    assert!((v / (MU_EARTH / r) - 1.0).abs() < 1e-12);
    let a = g.acceleration(x, 8).unwrap();
    let c = g.acceleration(x, 0).unwrap();
    for i in 0..3 {
        assert!((a[i] - c[i]).abs() <= 1e-12 * (MU_EARTH / (r * r)));
    }
}

#[test]
fn associated_legendre_orthonormality() {
    let gl = gauss_legendre_rule(40, 1e-15);
    let (x, w) = (gl.nodes_f64(), gl.weights_f64());
    for m in 0..=6 {
        for n in m..=12 {
            for k in m..=12 {
                let ip: f64 = x.iter().zip(&w).map(|(&s, w)| w * legendre_norm(n, m, s) * legendre_norm(k, m, s)).sum::<f64>() / 2.0;
                let want = if n != k {
                    0.0
                } else if m == 0 {
                    1.0
                } else {
                    2.0
                };
                assert!((ip - want).abs() < 1e-13, "n = {n}, k = {k}, m = {m}: {ip}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn acceleration_is_gradient(r in 6700.0f64..20000.0, lat in -1.5f64..1.5, lon in -3.1f64..3.1) {
        let g = synthetic_model(8);
        let x = point(r, lat, lon);
        let a = g.acceleration(x, 8).unwrap();
        let h = 1e-3;
        let scale = MU_EARTH / (r * r);
        for i in 0..3 {
            let (mut p, mut q) = (x, x);
            p[i] += h;
            q[i] -= h;
            let fd = (g.potential(p, 8).unwrap() - g.potential(q, 8).unwrap()) / (2.0 * h);
            prop_assert!((fd - a[i]).abs() < 1e-7 * scale, "component {i}: {fd} vs {}", a[i]);
        }
    }

    #[test]
    fn zonal_field_is_axisymmetric(r in 6700.0f64..20000.0, lat in -1.5f64..1.5, lon in -3.1f64..3.1, turn in -3.1f64..3.1) {
        let mut g = GravityModel::new(MU_EARTH, R_EARTH, 6).unwrap();
        for n in 2..=6 {
            g.set(n, 0, 1e-4 / n as f64, 0.0).unwrap();
        }
        prop_assert!(g.is_zonal());
        let (x, y) = (point(r, lat, lon), point(r, lat, lon + turn));
        let (vx, vy) = (g.potential(x, 6).unwrap(), g.potential(y, 6).unwrap());
        prop_assert!((vx - vy).abs() < 1e-14 * vx);
        let (ax, ay) = (g.acceleration(x, 6).unwrap(), g.acceleration(y, 6).unwrap());
        // rotate ax by `turn` about z
        let (c, s) = (turn.cos(), turn.sin());
        let rot = [c * ax[0] - s * ax[1], s * ax[0] + c * ax[1], ax[2]];
        let scale = MU_EARTH / (r * r);
        for i in 0..3 {
            prop_assert!((rot[i] - ay[i]).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn truncation_matches_lower_degree(r in 6700.0f64..20000.0, lat in -1.5f64..1.5, lon in -3.1f64..3.1) {
        let g = synthetic_model(8);
        let x = point(r, lat, lon);
        let t = g.truncated(4);
        prop_assert_eq!(t.potential(x, 8).unwrap(), g.potential(x, 4).unwrap());
        prop_assert_eq!(t.acceleration(x, 8).unwrap(), g.acceleration(x, 4).unwrap());
    }
}
