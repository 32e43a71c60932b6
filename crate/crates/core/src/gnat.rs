//! Bundle metrics built from six radial profiles. A spec (alpha_1..3,
//! beta_1..3) determines a metric G on the slit tangent bundle through
//!
//! ```text
//! G(X^h, Y^h) = (a1+a3)(r^2) g(X,Y) + (b1+b3)(r^2) g(X,U) g(Y,U)
//! G(X^h, Y^v) =      a2(r^2) g(X,Y) +      b2(r^2) g(X,U) g(Y,U)
//! G(X^v, Y^v) =      a1(r^2) g(X,Y) +      b1(r^2) g(X,U) g(Y,U)
//! ```
//!
//! with the derived functions phi_i = alpha_i + t beta_i,
//! alpha = a1(a1+a3) - a2^2 and phi = phi1(phi1+phi3) - phi2^2 controlling
//! non-degeneracy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chern::PointGeometry;
use crate::derivkit::{partial_fd, taylor_jet, Scalar, StepPolicy};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};

/// A scalar function of the energy t = r^2 on (0, inf) with derivative
/// access. Expression-backed profiles differentiate through jets; opaque
/// closures fall back to central differences.
#[derive(Clone)]
pub enum ScalarProfile {
    Expr(Expr),
    Opaque(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ScalarProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarProfile::Expr(e) => write!(f, "ScalarProfile({e})"),
            ScalarProfile::Opaque(_) => write!(f, "ScalarProfile(<opaque>)"),
        }
    }
}

impl ScalarProfile {
    pub fn parse(src: &str) -> Result<ScalarProfile> {
        Ok(ScalarProfile::Expr(parse_expr(src, &["t"])?))
    }

    pub fn constant(v: f64) -> ScalarProfile {
        ScalarProfile::Expr(Expr::constant(v))
    }

    pub fn from_expr(e: Expr) -> ScalarProfile {
        ScalarProfile::Expr(e)
    }

    fn guard(t: f64) -> Result<()> {
        if t <= 0.0 {
            return Err(Error::ProfileDomain(format!("profile evaluated at t = {t} <= 0")));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Self::guard(t)?;
        match self {
            ScalarProfile::Expr(e) => e.eval_f64(&[t]),
            ScalarProfile::Opaque(f) => Ok(f(t)),
        }
    }

    /// First derivative at t.
    pub fn d1(&self, t: f64) -> Result<f64> {
        Self::guard(t)?;
        match self {
            ScalarProfile::Expr(e) => {
                let jet = taylor_jet(|v| e.eval(v, &v[0]), &[t], 1)?;
                Ok(jet.partial(&[0]))
            }
            ScalarProfile::Opaque(f) => {
                let g = |p: &[f64]| {
                    Self::guard(p[0])?;
                    Ok(f(p[0]))
                };
                partial_fd(&g, &[t], &[0], StepPolicy::Auto)
            }
        }
    }

    /// Second derivative at t.
    pub fn d2(&self, t: f64) -> Result<f64> {
        Self::guard(t)?;
        match self {
            ScalarProfile::Expr(e) => {
                let jet = taylor_jet(|v| e.eval(v, &v[0]), &[t], 2)?;
                Ok(jet.partial(&[0, 0]))
            }
            ScalarProfile::Opaque(f) => {
                let g = |p: &[f64]| {
                    Self::guard(p[0])?;
                    Ok(f(p[0]))
                };
                partial_fd(&g, &[t], &[0, 0], StepPolicy::Auto)
            }
        }
    }

    /// Evaluate over a scalar algebra (profiles composed with r^2 inside
    /// jet computations). Only expression-backed profiles support this.
    pub fn eval_scalar<S: Scalar>(&self, t: S) -> Result<S> {
        match self {
            ScalarProfile::Expr(e) => {
                Self::guard(t.value())?;
                let proto = t.lift(0.0);
                e.eval(std::slice::from_ref(&t), &proto)
            }
            ScalarProfile::Opaque(_) => {
                Err(Error::Invalid("opaque profile cannot be evaluated on jets".into()))
            }
        }
    }

    /// Structurally the zero constant.
    pub fn is_zero_const(&self) -> bool {
        matches!(self, ScalarProfile::Expr(e) if e.is_const(0.0))
    }
}

/// The six profiles of a bundle metric.
#[derive(Debug, Clone)]
pub struct FNaturalSpec {
    pub a1: ScalarProfile,
    pub a2: ScalarProfile,
    pub a3: ScalarProfile,
    pub b1: ScalarProfile,
    pub b2: ScalarProfile,
    pub b3: ScalarProfile,
}

/// Values and first derivatives of all six profiles at one t, plus the
/// derived combinations the connector and Lie-derivative formulas use.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSet {
    pub t: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub a1p: f64,
    pub a2p: f64,
    pub a3p: f64,
    pub b1p: f64,
    pub b2p: f64,
    pub b3p: f64,
}

impl ProfileSet {
    pub fn a13(&self) -> f64 {
        self.a1 + self.a3
    }

    pub fn b13(&self) -> f64 {
        self.b1 + self.b3
    }

    pub fn a13p(&self) -> f64 {
        self.a1p + self.a3p
    }

    pub fn b13p(&self) -> f64 {
        self.b1p + self.b3p
    }

    pub fn phi1(&self) -> f64 {
        self.a1 + self.t * self.b1
    }

    pub fn phi2(&self) -> f64 {
        self.a2 + self.t * self.b2
    }

    pub fn phi3(&self) -> f64 {
        self.a3 + self.t * self.b3
    }

    pub fn phi13(&self) -> f64 {
        self.phi1() + self.phi3()
    }

    /// phi_i' = alpha_i' + beta_i + t beta_i'
    pub fn phi1p(&self) -> f64 {
        self.a1p + self.b1 + self.t * self.b1p
    }

    pub fn phi2p(&self) -> f64 {
        self.a2p + self.b2 + self.t * self.b2p
    }

    pub fn phi13p(&self) -> f64 {
        self.a13p() + self.b13() + self.t * self.b13p()
    }

    /// alpha = a1 (a1 + a3) - a2^2
    pub fn alpha(&self) -> f64 {
        self.a1 * self.a13() - self.a2 * self.a2
    }

    /// phi = phi1 (phi1 + phi3) - phi2^2
    pub fn phi(&self) -> f64 {
        self.phi1() * self.phi13() - self.phi2() * self.phi2()
    }
}

/// Lifted-frame blocks and the coordinate-frame matrix of G at one point.
#[derive(Debug, Clone)]
pub struct BundleMetricValue {
    pub ghh: DMatrix<f64>,
    pub ghv: DMatrix<f64>,
    pub gvv: DMatrix<f64>,
    pub m2n: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegularityClass {
    Riemannian,
    PseudoRiemannian,
    Degenerate { witness_t: f64 },
}

impl FNaturalSpec {
    pub fn new(
        a1: ScalarProfile,
        a2: ScalarProfile,
        a3: ScalarProfile,
        b1: ScalarProfile,
        b2: ScalarProfile,
        b3: ScalarProfile,
    ) -> FNaturalSpec {
        FNaturalSpec { a1, a2, a3, b1, b2, b3 }
    }

    /// alpha_1 = 1, everything else 0.
    pub fn sasaki() -> FNaturalSpec {
        FNaturalSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
        )
    }

    /// alpha_1 = beta_1 = 1/(1+t), alpha_2 = beta_2 = 0, alpha_1 + alpha_3 = 1,
    /// beta_1 + beta_3 = 0.
    pub fn cheeger_gromoll() -> FNaturalSpec {
        FNaturalSpec::new(
            ScalarProfile::parse("1/(1+t)").expect("static expression"),
            ScalarProfile::constant(0.0),
            ScalarProfile::parse("t/(1+t)").expect("static expression"),
            ScalarProfile::parse("1/(1+t)").expect("static expression"),
            ScalarProfile::constant(0.0),
            ScalarProfile::parse("-1/(1+t)").expect("static expression"),
        )
    }

    /// alpha_2 = beta_2 = 0 and beta_1 = beta_3 = 0 (so beta_1 + beta_3 = 0).
    pub fn kaluza_klein(a1: ScalarProfile, a3: ScalarProfile) -> FNaturalSpec {
        FNaturalSpec::new(
            a1,
            ScalarProfile::constant(0.0),
            a3,
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
        )
    }

    /// Kaluza-Klein type: alpha_2 = beta_2 = 0, the rest free.
    pub fn kk_type(
        a1: ScalarProfile,
        a3: ScalarProfile,
        b1: ScalarProfile,
        b3: ScalarProfile,
    ) -> FNaturalSpec {
        FNaturalSpec::new(
            a1,
            ScalarProfile::constant(0.0),
            a3,
            b1,
            ScalarProfile::constant(0.0),
            b3,
        )
    }

    /// All profile values and first derivatives at t.
    pub fn profiles_at(&self, t: f64) -> Result<ProfileSet> {
        Ok(ProfileSet {
            t,
            a1: self.a1.eval(t)?,
            a2: self.a2.eval(t)?,
            a3: self.a3.eval(t)?,
            b1: self.b1.eval(t)?,
            b2: self.b2.eval(t)?,
            b3: self.b3.eval(t)?,
            a1p: self.a1.d1(t)?,
            a2p: self.a2.d1(t)?,
            a3p: self.a3.d1(t)?,
            b1p: self.b1.d1(t)?,
            b2p: self.b2.d1(t)?,
            b3p: self.b3.d1(t)?,
        })
    }

    /// Horizontal and vertical distributions orthogonal: alpha_2 = beta_2 = 0
    /// on the default grid.
    pub fn is_kk_type(&self) -> bool {
        if self.a2.is_zero_const() && self.b2.is_zero_const() {
            return true;
        }
        default_t_grid().iter().all(|&t| {
            let a2 = self.a2.eval(t).unwrap_or(f64::NAN);
            let b2 = self.b2.eval(t).unwrap_or(f64::NAN);
            a2.abs() < 1e-12 && b2.abs() < 1e-12
        })
    }
}

/// 64 log-spaced energies in [1e-3, 1e3].
pub fn default_t_grid() -> Vec<f64> {
    let n = 64;
    (0..n).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64)).collect()
}

/// Evaluate the lifted-frame blocks and the coordinate matrix of G.
pub fn evaluate_g(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<BundleMetricValue> {
    let n = geom.dim();
    let ps = spec.profiles_at(geom.r2())?;
    let g = geom.g();
    let gu = geom.gu();
    let outer = gu * gu.transpose();

    let ghh = g * ps.a13() + &outer * ps.b13();
    let ghv = g * ps.a2 + &outer * ps.b2;
    let gvv = g * ps.a1 + &outer * ps.b1;

    // coordinate frame via d/dx^i = (d/dx^i)_h + N^k_i d/du^k
    let nmat = geom.nconn();
    let m_xx =
        &ghh + &ghv * nmat + nmat.transpose() * ghv.transpose() + nmat.transpose() * &gvv * nmat;
    let m_xu = &ghv + nmat.transpose() * &gvv;
    let mut m2n = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m2n[(i, j)] = m_xx[(i, j)];
            m2n[(i, n + j)] = m_xu[(i, j)];
            m2n[(n + i, j)] = m_xu[(j, i)];
            m2n[(n + i, n + j)] = gvv[(i, j)];
        }
    }
    Ok(BundleMetricValue { ghh, ghv, gvv, m2n })
}

/// Evaluate G on two lifted vectors given as (horizontal, vertical) pairs.
pub fn g_on_lifted(
    value: &BundleMetricValue,
    xh: &DVector<f64>,
    xv: &DVector<f64>,
    yh: &DVector<f64>,
    yv: &DVector<f64>,
) -> f64 {
    (xh.transpose() * &value.ghh * yh)[(0, 0)]
        + (xh.transpose() * &value.ghv * yv)[(0, 0)]
        + (yh.transpose() * &value.ghv * xv)[(0, 0)]
        + (xv.transpose() * &value.gvv * yv)[(0, 0)]
}

/// Classify the metric over a set of energies: Riemannian needs a1 > 0,
/// alpha > 0, phi1 > 0, phi > 0 at every sample; pseudo-Riemannian
/// (non-degenerate) needs alpha > 0 and phi > 0; anything else is degenerate
/// with the first violating t as witness.
pub fn classify_regularity(spec: &FNaturalSpec, t_samples: &[f64]) -> RegularityClass {
    let mut riemannian = true;
    for &t in t_samples {
        let ps = match spec.profiles_at(t) {
            Ok(ps) => ps,
            Err(_) => return RegularityClass::Degenerate { witness_t: t },
        };
        if !(ps.alpha() > 0.0 && ps.phi() > 0.0) {
            return RegularityClass::Degenerate { witness_t: t };
        }
        if !(ps.a1 > 0.0 && ps.phi1() > 0.0) {
            riemannian = false;
        }
    }
    if riemannian {
        RegularityClass::Riemannian
    } else {
        RegularityClass::PseudoRiemannian
    }
}

/// Check that the nullity of det(M2n) and the profile functions agree at this
/// point: the row-equilibrated determinant exceeds 1e-10 in absolute value
/// iff both |alpha| and |phi| do at t = r^2.
///
/// A spec with alpha < 0 or phi < 0 (bounded away from zero) fails the
/// positivity classification of [`classify_regularity`] but still produces an
/// invertible, indefinite-signature matrix, so the determinant check is
/// against nullity rather than positivity.
pub fn determinant_consistency(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<bool> {
    let value = evaluate_g(spec, geom)?;
    let m = &value.m2n;
    let dim = m.nrows();
    let mut eq = m.clone();
    for r in 0..dim {
        let scale = (0..dim).map(|c| eq[(r, c)].abs()).fold(0.0_f64, f64::max);
        if scale > 0.0 {
            for c in 0..dim {
                eq[(r, c)] /= scale;
            }
        }
    }
    let det = eq.determinant();
    let nonnull_by_det = det.abs() > 1e-10;
    let ps = spec.profiles_at(geom.r2())?;
    let nonnull_by_class = ps.alpha().abs() > 1e-10 && ps.phi().abs() > 1e-10;
    Ok(nonnull_by_det == nonnull_by_class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::{BundlePoint, FinslerModel};

    fn geom_at(model: &FinslerModel, x: Vec<f64>, u: Vec<f64>) -> PointGeometry {
        PointGeometry::light(model, &BundlePoint::new(x, u).unwrap()).unwrap()
    }

    #[test]
    fn sasaki_on_euclidean_is_identity() {
        let m = FinslerModel::euclidean(2);
        let geom = geom_at(&m, vec![0.3, -0.7], vec![1.2, 0.4]);
        let v = evaluate_g(&FNaturalSpec::sasaki(), &geom).unwrap();
        assert!((v.m2n.clone() - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-12);
    }

    #[test]
    fn cheeger_gromoll_vertical_entries() {
        let m = FinslerModel::euclidean(2);
        let geom = geom_at(&m, vec![0.0, 0.0], vec![1.0, 0.0]);
        let v = evaluate_g(&FNaturalSpec::cheeger_gromoll(), &geom).unwrap();
        // t = 1: alpha1 = 1/2; Gvv(e2, e2) = 0.5, Gvv(e1, e1) = 0.5 + 0.5 = 1
        assert!((v.gvv[(1, 1)] - 0.5).abs() < 1e-12);
        assert!((v.gvv[(0, 0)] - 1.0).abs() < 1e-12);
        // hv block vanishes for any Kaluza-Klein-type spec
        assert!(v.ghv.abs().max() < 1e-14);
    }

    #[test]
    fn profile_derivatives_match_fd() {
        let cg = FNaturalSpec::cheeger_gromoll();
        for t in [0.2, 1.0, 7.3] {
            let d_jet = cg.a1.d1(t).unwrap();
            let d_fd =
                partial_fd(&|p: &[f64]| cg.a1.eval(p[0]), &[t], &[0], StepPolicy::Auto).unwrap();
            assert!((d_jet - d_fd).abs() < 1e-7);
            // exact: d/dt 1/(1+t) = -1/(1+t)^2
            assert!((d_jet + 1.0 / ((1.0 + t) * (1.0 + t))).abs() < 1e-14);
        }
        // opaque profiles go through the fd fallback
        let opaque = ScalarProfile::Opaque(Arc::new(|t: f64| 1.0 / (1.0 + t)));
        assert!((opaque.d1(1.0).unwrap() + 0.25).abs() < 1e-9);
    }

    #[test]
    fn classification_of_named_presets() {
        let grid = default_t_grid();
        assert_eq!(
            classify_regularity(&FNaturalSpec::sasaki(), &grid),
            RegularityClass::Riemannian
        );
        assert_eq!(
            classify_regularity(&FNaturalSpec::cheeger_gromoll(), &grid),
            RegularityClass::Riemannian
        );
        // alpha1 = 1, alpha2 = 2, alpha3 = 0 gives alpha = 1 - 4 < 0
        let bad = FNaturalSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(2.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
        );
        assert!(matches!(classify_regularity(&bad, &grid), RegularityClass::Degenerate { .. }));
    }

    #[test]
    fn sign_change_yields_witness() {
        // alpha1 + alpha3 = t - 1 makes alpha = t - 1 change sign at t = 1
        let spec = FNaturalSpec::kaluza_klein(
            ScalarProfile::constant(1.0),
            ScalarProfile::parse("t - 2").unwrap(),
        );
        match classify_regularity(&spec, &default_t_grid()) {
            RegularityClass::Degenerate { witness_t } => assert!(witness_t < 1.0),
            other => panic!("expected degenerate, got {other:?}"),
        }
    }

    #[test]
    fn determinant_agrees_with_classification() {
        let m = FinslerModel::euclidean(2);
        let geom = geom_at(&m, vec![0.1, 0.2], vec![0.8, -0.5]);
        assert!(determinant_consistency(&FNaturalSpec::sasaki(), &geom).unwrap());
        assert!(determinant_consistency(&FNaturalSpec::cheeger_gromoll(), &geom).unwrap());
        // alpha = t - 1 vanishes at t = 1: pick u with r^2 = 1 so det(M2n) = 0
        let null_at_one = FNaturalSpec::kaluza_klein(
            ScalarProfile::constant(1.0),
            ScalarProfile::parse("t - 2").unwrap(),
        );
        let geom1 = geom_at(&m, vec![0.0, 0.0], vec![0.6, 0.8]);
        assert!(determinant_consistency(&null_at_one, &geom1).unwrap());
        // indefinite but invertible: alpha = -3 everywhere, det stays nonzero
        let indefinite = FNaturalSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(2.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
        );
        assert!(determinant_consistency(&indefinite, &geom).unwrap());
    }

    #[test]
    fn kk_type_flag() {
        assert!(FNaturalSpec::sasaki().is_kk_type());
        assert!(FNaturalSpec::cheeger_gromoll().is_kk_type());
        let non_kk = FNaturalSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::parse("0.1/(1+t)").unwrap(),
            ScalarProfile::constant(1.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
            ScalarProfile::constant(0.0),
        );
        assert!(!non_kk.is_kk_type());
    }

    #[test]
    fn spherical_symmetry_in_the_flat_model() {
        // rotate u by an orthogonal map; the blocks transform covariantly, so
        // scalar values at (x, Ou) with rotated arguments match those at (x, u)
        let m = FinslerModel::euclidean(2);
        let spec = FNaturalSpec::cheeger_gromoll();
        let (c, s) = (0.6_f64, 0.8_f64);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let u = DVector::from_vec(vec![0.9, 0.4]);
        let ur = &rot * &u;
        let g1 = geom_at(&m, vec![0.0, 0.0], vec![u[0], u[1]]);
        let g2 = geom_at(&m, vec![0.0, 0.0], vec![ur[0], ur[1]]);
        let v1 = evaluate_g(&spec, &g1).unwrap();
        let v2 = evaluate_g(&spec, &g2).unwrap();
        let x = DVector::from_vec(vec![1.0, -0.3]);
        let y = DVector::from_vec(vec![0.2, 0.7]);
        let zero = DVector::zeros(2);
        for (a1, b1, a2, b2) in [(&x, &zero, &y, &zero), (&zero, &x, &zero, &y), (&x, &y, &y, &x)] {
            let val1 = g_on_lifted(&v1, a1, b1, a2, b2);
            let a1r = &rot * a1;
            let b1r = &rot * b1;
            let a2r = &rot * a2;
            let b2r = &rot * b2;
            let val2 = g_on_lifted(&v2, &a1r, &b1r, &a2r, &b2r);
            assert!((val1 - val2).abs() < 1e-12, "{val1} vs {val2}");
        }
    }

    #[test]
    fn lifted_frame_recovered_from_m2n() {
        use crate::expr::{parse_expr, Expr};
        let m = FinslerModel::randers_flat(
            2,
            vec![parse_expr("0.2 + 0.1*sin(x1)", &["x1", "x2"]).unwrap(), Expr::constant(0.0)],
            1.0,
        )
        .unwrap();
        let geom = geom_at(&m, vec![0.4, -0.2], vec![1.1, 0.3]);
        let spec = FNaturalSpec::cheeger_gromoll();
        let v = evaluate_g(&spec, &geom).unwrap();
        let n = 2;
        let nmat = geom.nconn();
        // delta/dx^i in coordinates is (e_i, -N e_i)
        for i in 0..n {
            for j in 0..n {
                let mut hh = v.m2n[(i, j)];
                for k in 0..n {
                    hh -= nmat[(k, i)] * v.m2n[(n + k, j)];
                }
                for l in 0..n {
                    hh -= nmat[(l, j)] * v.m2n[(i, n + l)];
                    for k in 0..n {
                        hh += nmat[(k, i)] * nmat[(l, j)] * v.m2n[(n + k, n + l)];
                    }
                }
                assert!((hh - v.ghh[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn profile_domain_guard() {
        let cg = FNaturalSpec::cheeger_gromoll();
        assert!(matches!(cg.a1.eval(0.0), Err(Error::ProfileDomain(_))));
        assert!(matches!(cg.a1.eval(-1.0), Err(Error::ProfileDomain(_))));
    }
}
