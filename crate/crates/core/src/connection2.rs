//! The Levi-Civita connection of a bundle metric, two ways: the closed-form
//! connector tensors P_hh .. Q_vv, and an independent oracle that builds the
//! Christoffel symbols of the 2n-dimensional coordinate metric from finite
//! differences of M2n (coordinate brackets vanish, so the Koszul formula
//! reduces to the classical Christoffel expression) and differentiates the
//! lifted coordinate fields exactly.
//!
//! On top of those: the divergence of the geodesic field (trace formula plus
//! a density-form oracle) and the totally-geodesic-fiber classification.

use nalgebra::{DMatrix, DVector};

use crate::chern::{LiftAxis, PointGeometry};
use crate::derivkit::{partial_fd, StepPolicy};
use crate::error::{Error, Result};
use crate::finsler::{BundlePoint, FinslerModel};
use crate::gnat::{evaluate_g, FNaturalSpec, ProfileSet};

/// The six connector tensors evaluated on a pair of sections.
#[derive(Debug, Clone)]
pub struct ConnectorValue {
    pub phh: DVector<f64>,
    pub qhh: DVector<f64>,
    pub phv: DVector<f64>,
    pub qhv: DVector<f64>,
    pub pvv: DVector<f64>,
    pub qvv: DVector<f64>,
}

/// Components of `nabla_A B` in the coordinate frame of the slit bundle.
#[derive(Debug, Clone)]
pub struct KoszulValue {
    pub components: DVector<f64>,
}

fn check_nondegenerate(ps: &ProfileSet) -> Result<()> {
    if ps.alpha().abs() < 1e-10 || ps.phi().abs() < 1e-10 {
        return Err(Error::DegenerateMetric(format!(
            "alpha = {:.3e}, phi = {:.3e} at t = {:.6}",
            ps.alpha(),
            ps.phi(),
            ps.t
        )));
    }
    Ok(())
}

/// Evaluate the six connector tensors on (s1, s2) at the geometry's point.
///
/// Each sector comes from projecting the Koszul formula for the bundle metric
/// onto the horizontal and vertical blocks and solving the resulting pair of
/// vector equations
///
/// ```text
/// (a1+a3) P + (b1+b3) g(P,U) U + a2 Q + b2 g(Q,U) U = A1
///      a2 P +      b2 g(P,U) U + a1 Q + b1 g(Q,U) U = A2
/// ```
///
/// first for the U-components (2x2 system with determinant phi) and then for
/// the vectors (determinant alpha). The right-hand sides A1, A2 collect the
/// derivatives of the metric blocks along lifted fields and the bracket
/// terms, reduced with the standard curvature and Cartan identities; all
/// profile functions and their derivatives are taken at t = r^2.
pub fn pq_tensors(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    s1: &DVector<f64>,
    s2: &DVector<f64>,
) -> Result<ConnectorValue> {
    let ps = spec.profiles_at(geom.r2())?;
    check_nondegenerate(&ps)?;

    let u = geom.u();
    let gs1u = geom.g_dot_u(s1);
    let gs2u = geom.g_dot_u(s2);
    let gs12 = geom.g_dot(s1, s2);

    let r_s1s2_u = geom.curv_apply(s1, s2, u);
    // duals of Z -> g(R(Z, s1) U, s2) and Z -> g(R(Z, s2) U, s1)
    let v12 = geom.curv_u_dual(s1, s2);
    let v21 = geom.curv_u_dual(s2, s1);

    let cbar = geom.cartan_bar_apply(s1, s2);
    let lbar = geom.landsberg_apply(s1, s2);

    // hh sector
    let rest1_hh = (-&r_s1s2_u - &v21 - &v12) * (ps.a2 / 2.0);
    let rest2_hh = &lbar * (-ps.a2)
        + u * (-ps.a13p() * gs12)
        + &cbar * (-ps.a13())
        + u * (-ps.b13p() * gs1u * gs2u)
        + (s1 * gs2u + s2 * gs1u) * (-ps.b13() / 2.0)
        + &r_s1s2_u * (-ps.a1 / 2.0);
    let (phh, qhh) = solve_connector(&ps, geom, rest1_hh, rest2_hh);

    // hv sector
    let rest1_hv = &lbar * ps.a2
        + s1 * (ps.a13p() * gs2u)
        + (s2 * gs1u + u * gs12) * (ps.b13() / 2.0)
        + &cbar * ps.a13()
        + u * (ps.b13p() * gs1u * gs2u)
        - &v12 * (ps.a1 / 2.0);
    let rest2_hv = (s1 * gs2u - u * gs12) * (ps.a2p - ps.b2 / 2.0);
    let (phv, qhv) = solve_connector(&ps, geom, rest1_hv, rest2_hv);

    // vv sector
    let rest1_vv = &lbar * ps.a1
        + (s2 * gs1u + s1 * gs2u) * (ps.a2p + ps.b2 / 2.0)
        + &cbar * (2.0 * ps.a2)
        + u * (2.0 * ps.b2p * gs1u * gs2u + ps.b2 * gs12);
    let rest2_vv = (s2 * gs1u + s1 * gs2u - u * gs12) * ps.a1p
        + &cbar * ps.a1
        + u * (ps.b1p * gs1u * gs2u + ps.b1 * gs12);
    let (pvv, qvv) = solve_connector(&ps, geom, rest1_vv, rest2_vv);

    Ok(ConnectorValue { phh, qhh, phv, qhv, pvv, qvv })
}

fn solve_connector(
    ps: &ProfileSet,
    geom: &PointGeometry,
    rest1: DVector<f64>,
    rest2: DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let u = geom.u();
    let g1u = geom.g_dot_u(&rest1);
    let g2u = geom.g_dot_u(&rest2);
    let phi = ps.phi();
    let p_scalar = (ps.phi1() * g1u - ps.phi2() * g2u) / phi;
    let q_scalar = (ps.phi13() * g2u - ps.phi2() * g1u) / phi;
    let r1 = rest1 - u * (ps.b13() * p_scalar + ps.b2 * q_scalar);
    let r2 = rest2 - u * (ps.b2 * p_scalar + ps.b1 * q_scalar);
    let alpha = ps.alpha();
    let pvec = (&r1 * ps.a1 - &r2 * ps.a2) / alpha;
    let qvec = (&r2 * ps.a13() - &r1 * ps.a2) / alpha;
    (pvec, qvec)
}

/// Assemble `nabla_A B` from the connector tensors for lifted coordinate
/// vectors, returned in the coordinate frame of the slit bundle.
pub fn closed_form_covariant(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    a: LiftAxis,
    b: LiftAxis,
) -> Result<DVector<f64>> {
    let n = geom.dim();
    let basis = |i: usize| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
    let (hsec, vsec) = match (a, b) {
        (LiftAxis::Hor(i), LiftAxis::Hor(j)) => {
            let pq = pq_tensors(spec, geom, &basis(i), &basis(j))?;
            let nabla = DVector::from_fn(n, |k, _| geom.gamma()[(k, i, j)]);
            (nabla + pq.phh, pq.qhh)
        }
        (LiftAxis::Hor(i), LiftAxis::Ver(j)) => {
            let pq = pq_tensors(spec, geom, &basis(i), &basis(j))?;
            let nabla = DVector::from_fn(n, |k, _| geom.gamma()[(k, i, j)]);
            (pq.phv, nabla + pq.qhv)
        }
        (LiftAxis::Ver(i), LiftAxis::Hor(j)) => {
            // torsion-freeness: nabla_{X^v}Y^h = nabla_{Y^h}X^v - [Y^h, X^v],
            // so the vertical part loses the Lbar(Y, X) bracket term
            let pq = pq_tensors(spec, geom, &basis(j), &basis(i))?;
            let lbar = geom.landsberg_apply(&basis(j), &basis(i));
            (pq.phv, pq.qhv - lbar)
        }
        (LiftAxis::Ver(i), LiftAxis::Ver(j)) => {
            let pq = pq_tensors(spec, geom, &basis(i), &basis(j))?;
            (pq.pvv, pq.qvv)
        }
    };
    // h{s} has coordinate components (s, -N s); v{w} has (0, w)
    let mut out = DVector::zeros(2 * n);
    for c in 0..n {
        out[c] = hsec[c];
        let mut ucomp = vsec[c];
        for j in 0..n {
            ucomp -= geom.nconn()[(c, j)] * hsec[j];
        }
        out[n + c] = ucomp;
    }
    Ok(out)
}

/// Christoffel symbols of the coordinate metric M2n at one point, from
/// finite differences of M2n, plus the matrix itself and its inverse.
pub struct KoszulConnection {
    n: usize,
    /// Gammabar^C_PQ flattened as (C * 2n + P) * 2n + Q.
    gammabar: Vec<f64>,
}

/// Build the finite-difference Christoffel data of M2n at the geometry's
/// point. Fails with `SingularSystem` when cond(M2n) > 1e12.
pub fn koszul_connection(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<KoszulConnection> {
    let n = geom.dim();
    let dim = 2 * n;
    let model = geom.model();
    let ps = spec.profiles_at(geom.r2())?;
    check_nondegenerate(&ps)?;

    let m_at = |q: &[f64]| -> Result<DMatrix<f64>> {
        let bp = BundlePoint::from_coords(q)?;
        let g = PointGeometry::light(model, &bp)?;
        Ok(evaluate_g(spec, &g)?.m2n)
    };
    let coords = geom.point().coords();
    let m0 = m_at(&coords)?;

    let svd = m0.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::SingularSystem(format!(
            "cond(M2n) = {:.3e} exceeds 1e12",
            smax / smin
        )));
    }
    let minv = m0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("M2n not invertible".into()))?;

    // dM/dq^A entrywise by central differences
    let mut dm: Vec<DMatrix<f64>> = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut d = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in r..dim {
                let f = |q: &[f64]| Ok(m_at(q)?[(r, c)]);
                let v = partial_fd(&f, &coords, &[a], StepPolicy::Auto)?;
                d[(r, c)] = v;
                d[(c, r)] = v;
            }
        }
        dm.push(d);
    }

    let mut gammabar = vec![0.0; dim * dim * dim];
    for c in 0..dim {
        for p in 0..dim {
            for q in 0..dim {
                let mut s = 0.0;
                for d in 0..dim {
                    s += minv[(c, d)] * (dm[p][(d, q)] + dm[q][(d, p)] - dm[d][(p, q)]);
                }
                gammabar[(c * dim + p) * dim + q] = 0.5 * s;
            }
        }
    }
    Ok(KoszulConnection { n, gammabar })
}

impl KoszulConnection {
    fn gbar(&self, c: usize, p: usize, q: usize) -> f64 {
        let dim = 2 * self.n;
        self.gammabar[(c * dim + p) * dim + q]
    }
}

/// Coordinate components at the base point of the lifted coordinate vector
/// field, plus the derivatives of its coefficient functions (exact, from the
/// geometry's jets of N).
fn lifted_axis_data(geom: &PointGeometry, axis: LiftAxis) -> (DVector<f64>, DMatrix<f64>) {
    let n = geom.dim();
    let dim = 2 * n;
    let mut value = DVector::zeros(dim);
    // dcoef[(c, p)] = d(component c)/d(coordinate p)
    let mut dcoef = DMatrix::zeros(dim, dim);
    match axis {
        LiftAxis::Hor(j) => {
            value[j] = 1.0;
            for c in 0..n {
                value[n + c] = -geom.nconn()[(c, j)];
                let njet = geom.nconn_jet(c, j);
                for p in 0..dim {
                    dcoef[(n + c, p)] = -njet.derivative(p).value();
                }
            }
        }
        LiftAxis::Ver(j) => {
            value[n + j] = 1.0;
        }
    }
    (value, dcoef)
}

/// `nabla_A B` for lifted coordinate vectors A, B via the finite-difference
/// Christoffel data: A^P (d_P B^C + Gammabar^C_PQ B^Q).
pub fn koszul_covariant(
    geom: &PointGeometry,
    conn: &KoszulConnection,
    a: LiftAxis,
    b: LiftAxis,
) -> KoszulValue {
    let dim = 2 * conn.n;
    let (avec, _) = lifted_axis_data(geom, a);
    let (bvec, db) = lifted_axis_data(geom, b);
    let mut out = DVector::zeros(dim);
    for c in 0..dim {
        let mut s = 0.0;
        for p in 0..dim {
            if avec[p] == 0.0 && a != b {
                // still need the Christoffel part below when avec[p] != 0 only
            }
            let mut inner = db[(c, p)];
            for q in 0..dim {
                inner += conn.gbar(c, p, q) * bvec[q];
            }
            s += avec[p] * inner;
        }
        out[c] = s;
    }
    KoszulValue { components: out }
}

/// Divergence of the geodesic field: the trace of X -> P_hh(u, X) + Q_hv(u, X).
pub fn divergence_geodesic(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<f64> {
    let n = geom.dim();
    let u = geom.u().clone();
    let mut trace = 0.0;
    for i in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        let pq = pq_tensors(spec, geom, &u, &e)?;
        trace += pq.phh[i] + pq.qhv[i];
    }
    Ok(trace)
}

/// Density-form divergence oracle:
/// (1/w) d_A (w zeta^A) with w = sqrt(|det M2n|) and zeta = (u, -2G).
pub fn divergence_geodesic_density(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<f64> {
    let n = geom.dim();
    let dim = 2 * n;
    let model = geom.model();
    let ps = spec.profiles_at(geom.r2())?;
    check_nondegenerate(&ps)?;

    let weighted = |q: &[f64], a: usize| -> Result<f64> {
        let bp = BundlePoint::from_coords(q)?;
        let g = PointGeometry::light(model, &bp)?;
        let m = evaluate_g(spec, &g)?.m2n;
        let w = m.determinant().abs().sqrt();
        let zeta = if a < n { q[n + a] } else { -2.0 * g.spray()[a - n] };
        Ok(w * zeta)
    };
    let coords = geom.point().coords();
    let m0 = evaluate_g(spec, geom)?.m2n;
    let w0 = m0.determinant().abs().sqrt();
    if w0 < 1e-12 {
        return Err(Error::DegenerateMetric("density weight vanished".into()));
    }
    let mut acc = 0.0;
    for a in 0..dim {
        let f = |q: &[f64]| weighted(q, a);
        acc += partial_fd(&f, &coords, &[a], StepPolicy::Auto)?;
    }
    Ok(acc / w0)
}

/// Whether the fibers are totally geodesic, decided two independent ways.
#[derive(Debug, Clone)]
pub enum FiberVerdict {
    TotallyGeodesic,
    Violated { witness: BundlePoint, residual: f64 },
}

#[derive(Debug, Clone)]
pub struct FiberCheck {
    pub verdict: FiberVerdict,
    /// max |P_vv(X, X)| over the sampled points and probe vectors
    pub direct_max: f64,
    /// max |Lbar - (alpha2/alpha1) Cbar| over the sampled points
    pub condition1_max: f64,
    /// max residual of the two-profile system after fitting c
    pub condition2_max: f64,
    pub fitted_c: f64,
}

/// Test the totally-geodesic-fiber conditions on a sample of bundle points.
///
/// The direct route probes P_vv(X, X) = 0; the profile route checks
/// Lbar = (alpha2/alpha1)(r^2) Cbar at every point together with the
/// existence of one constant c fitting
/// `alpha2 = c (t a1' + a1)/sqrt|phi1|, beta2 = c (b1 - a1')/sqrt|phi1|`
/// over the energy samples (least squares, then max residual).
pub fn fiber_geodesic_check(
    spec: &FNaturalSpec,
    model: &FinslerModel,
    points: &[BundlePoint],
    probes: &[DVector<f64>],
    tol: f64,
) -> Result<FiberCheck> {
    let mut direct_max: f64 = 0.0;
    let mut condition1_max: f64 = 0.0;
    let mut worst: Option<(BundlePoint, f64)> = None;
    let mut t_samples = Vec::with_capacity(points.len());

    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let ps = spec.profiles_at(geom.r2())?;
        check_nondegenerate(&ps)?;
        t_samples.push(geom.r2());
        let n = geom.dim();

        let mut point_residual: f64 = 0.0;
        for x in probes {
            let pq = pq_tensors(spec, &geom, x, x)?;
            point_residual = point_residual.max(pq.pvv.abs().max());
        }
        direct_max = direct_max.max(point_residual);

        // condition (1): Lbar = (a2/a1)(r^2) Cbar as (1,2)-tensors
        let ratio = ps.a2 / ps.a1;
        let mut c1: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let lhs = geom.landsberg().l_up[(k, i, j)];
                    let rhs = ratio * geom.cartan_bar()[(k, i, j)];
                    c1 = c1.max((lhs - rhs).abs());
                }
            }
        }
        condition1_max = condition1_max.max(c1);

        let combined = point_residual.max(c1);
        if worst.as_ref().is_none_or(|(_, r)| combined > *r) {
            worst = Some((p.clone(), combined));
        }
    }

    // condition (2): one constant c across all sampled energies
    let mut ys = Vec::new();
    let mut ks = Vec::new();
    for &t in &t_samples {
        let ps = spec.profiles_at(t)?;
        let p1 = ps.phi1();
        if p1.abs() < 1e-12 {
            return Err(Error::DegenerateMetric(format!("phi1 = 0 at t = {t}")));
        }
        let root = p1.abs().sqrt();
        ys.push(ps.a2);
        ks.push((t * ps.a1p + ps.a1) / root);
        ys.push(ps.b2);
        ks.push((ps.b1 - ps.a1p) / root);
    }
    let kk: f64 = ks.iter().map(|k| k * k).sum();
    let fitted_c = if kk > 1e-14 {
        ks.iter().zip(&ys).map(|(k, y)| k * y).sum::<f64>() / kk
    } else {
        0.0
    };
    let condition2_max = ks
        .iter()
        .zip(&ys)
        .map(|(k, y)| (y - fitted_c * k).abs())
        .fold(0.0_f64, f64::max);

    let profile_route_holds = condition1_max < tol && condition2_max < tol;
    let direct_holds = direct_max < tol;
    let verdict = if profile_route_holds && direct_holds {
        FiberVerdict::TotallyGeodesic
    } else {
        let (witness, residual) = worst.expect("at least one sample point");
        FiberVerdict::Violated { witness, residual: residual.max(condition2_max) }
    };
    Ok(FiberCheck { verdict, direct_max, condition1_max, condition2_max, fitted_c })
}
