//! Deterministic sample generation for the verification suites: bundle
//! points on fixed energy shells, random admissible bundle-metric specs and
//! random polynomial/trigonometric fields, all driven by a seedable portable
//! generator (ChaCha8).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::Expr;
use crate::finsler::BundlePoint;
use crate::gnat::{FNaturalSpec, ScalarProfile};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bundle points with x uniform in [-x_box, x_box]^n and u on a cycle of
/// radii: the given shells first, then uniformly random radii in [0.3, 3].
/// Directions are uniform on the sphere. Radii never drop below 0.1, keeping
/// the slit-domain guard comfortable.
pub fn sample_points(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
    shells: &[f64],
    x_box: f64,
) -> Vec<BundlePoint> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-x_box..x_box)).collect();
        let radius = if k % 3 < 2 && !shells.is_empty() {
            shells[k % shells.len()]
        } else {
            rng.gen_range(0.3..3.0)
        };
        // isotropic direction via normal deviates (Box-Muller)
        let mut dir: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (-2.0 * u1.ln()).sqrt() * u2.cos()
            })
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        for d in &mut dir {
            *d *= radius / norm;
        }
        out.push(BundlePoint::new(x, dir).expect("radius bounded away from zero"));
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// A random Riemannian Kaluza-Klein-type spec: alpha_2 = beta_2 = 0 and
/// profiles built so that alpha_1, alpha_1 + alpha_3, phi_1 and
/// phi_1 + phi_3 stay positive on all of (0, inf).
pub fn random_kk_spec(rng: &mut ChaCha8Rng) -> FNaturalSpec {
    let c0 = rng.gen_range(0.5..1.2);
    let c1 = rng.gen_range(0.0..0.5);
    let d0 = rng.gen_range(0.3..1.0);
    let d1 = rng.gen_range(0.0..0.5);
    let e1 = rng.gen_range(-0.25..0.25);
    let e3 = rng.gen_range(-0.2..0.2);
    let a1 = ScalarProfile::parse(&format!("{} + {}/(1+t)", fmt(c0), fmt(c1))).expect("generated");
    // alpha_3 chosen so alpha_1 + alpha_3 = d0 + c0 + d1 t/(1+t)
    let a3 = ScalarProfile::parse(&format!("{} + {}*t/(1+t) - {}/(1+t)", fmt(d0), fmt(d1), fmt(c1)))
        .expect("generated");
    let b1 = ScalarProfile::parse(&format!("{}/(1+t)", fmt(e1))).expect("generated");
    // beta_1 + beta_3 = e3/(1+t)
    let b3 = ScalarProfile::parse(&format!("({} - {})/(1+t)", fmt(e3), fmt(e1))).expect("generated");
    FNaturalSpec::kk_type(a1, a3, b1, b3)
}

/// A random vector field on the chart: affine plus a bounded sine term per
/// component.
pub fn random_vector_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<Expr> {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    (0..n)
        .map(|_| {
            let c0 = rng.gen_range(-1.0..1.0);
            let lin: Vec<String> = (0..n)
                .map(|j| format!("{}*x{}", fmt(rng.gen_range(-1.0..1.0)), j + 1))
                .collect();
            let amp = rng.gen_range(-0.5..0.5);
            let arg = rng.gen_range(0..n) + 1;
            let src = format!("{} + {} + {}*sin(x{})", fmt(c0), lin.join(" + "), fmt(amp), arg);
            crate::expr::parse_expr(&src, &name_refs).expect("generated expression")
        })
        .collect()
}

/// A constant skew matrix as an endo-section (P^i_j entries).
pub fn random_skew_endo(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Expr>> {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = -v;
        }
    }
    a.iter()
        .map(|row| row.iter().map(|&v| Expr::constant(v)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnat::{classify_regularity, default_t_grid, RegularityClass};

    #[test]
    fn sampling_is_deterministic() {
        let mut r1 = rng_from_seed(7);
        let mut r2 = rng_from_seed(7);
        let p1 = sample_points(&mut r1, 2, 10, &[0.5, 2.0], 0.8);
        let p2 = sample_points(&mut r2, 2, 10, &[0.5, 2.0], 0.8);
        assert_eq!(p1, p2);
        let mut r3 = rng_from_seed(8);
        let p3 = sample_points(&mut r3, 2, 10, &[0.5, 2.0], 0.8);
        assert_ne!(p1, p3);
    }

    #[test]
    fn random_kk_specs_are_riemannian() {
        let mut rng = rng_from_seed(123);
        let grid = default_t_grid();
        for _ in 0..20 {
            let spec = random_kk_spec(&mut rng);
            assert!(spec.is_kk_type());
            assert_eq!(classify_regularity(&spec, &grid), RegularityClass::Riemannian);
        }
    }

    #[test]
    fn random_fields_evaluate() {
        let mut rng = rng_from_seed(5);
        let f = random_vector_field(&mut rng, 3);
        for e in &f {
            assert!(e.eval_f64(&[0.1, -0.2, 0.3]).is_ok());
        }
        let p = random_skew_endo(&mut rng, 3);
        for i in 0..3 {
            for j in 0..3 {
                let vij = p[i][j].eval_f64(&[]).unwrap();
                let vji = p[j][i].eval_f64(&[]).unwrap();
                assert_eq!(vij, -vji);
            }
        }
    }
}
