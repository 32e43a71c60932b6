//! Lie derivatives of a bundle metric along lifted fields, and the verdict
//! engines deciding whether a given lift is Killing, homothetic or conformal.
//!
//! Five closed-form Lie derivatives are implemented (horizontal, vertical and
//! complete lifts of a base vector field, and the vertical and horizontal
//! transvections iota P = v{P(U)}, tau P = h{P(U)} of an endomorphism
//! section). Each is backed by [`lie_numeric_oracle`], which differentiates
//! the coordinate metric and the field's coordinate components by finite
//! differences and knows nothing about the closed forms.
//!
//! Verdicts are sampled certificates: every characterization condition is
//! evaluated as a residual over a deterministic sample set, the worst point is
//! reported as a witness, and a non-zero conformal factor is always the
//! characterization's closed-form expression, never fitted.

use nalgebra::{DMatrix, DVector};

use crate::chern::{LiftAxis, PointGeometry};
use crate::derivkit::{partial_fd, Jet, StepPolicy};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::finsler::{BundlePoint, FinslerModel};
use crate::gnat::{default_t_grid, evaluate_g, FNaturalSpec};

/// A vector field on the base chart, one expression per component in x1..xn.
#[derive(Debug, Clone)]
pub struct VectorFieldOnM {
    pub coeffs: Vec<Expr>,
}

impl VectorFieldOnM {
    pub fn new(coeffs: Vec<Expr>) -> VectorFieldOnM {
        VectorFieldOnM { coeffs }
    }

    pub fn parse(srcs: &[&str], n: usize) -> Result<VectorFieldOnM> {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let coeffs = srcs
            .iter()
            .map(|s| crate::expr::parse_expr(s, &refs))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorFieldOnM { coeffs })
    }

    pub fn value(&self, x: &[f64]) -> Result<DVector<f64>> {
        let vals = self
            .coeffs
            .iter()
            .map(|e| e.eval_f64(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }
}

/// An endomorphism-valued section P^i_j(x, u); expressions in x1..xn, u1..un.
#[derive(Debug, Clone)]
pub struct EndoSection {
    /// rows[i][j] = P^i_j
    pub rows: Vec<Vec<Expr>>,
}

impl EndoSection {
    pub fn new(rows: Vec<Vec<Expr>>) -> EndoSection {
        EndoSection { rows }
    }

    pub fn identity(n: usize) -> EndoSection {
        EndoSection {
            rows: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn value(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.rows[i][j].eval_f64(q)?;
            }
        }
        Ok(m)
    }
}

/// Symmetric bilinear form on the lifted frame at one point.
#[derive(Debug, Clone)]
pub struct LieValue {
    pub hh: DMatrix<f64>,
    pub hv: DMatrix<f64>,
    pub vv: DMatrix<f64>,
}

impl LieValue {
    pub fn max_abs(&self) -> f64 {
        self.hh.abs().max().max(self.hv.abs().max()).max(self.vv.abs().max())
    }

    fn axpy(&mut self, c: f64, other: &LieValue) {
        self.hh += c * &other.hh;
        self.hv += c * &other.hv;
        self.vv += c * &other.vv;
    }
}

/// Max block deviation between two Lie values.
pub fn lie_deviation(a: &LieValue, b: &LieValue) -> f64 {
    let mut d = a.clone();
    d.axpy(-2.0, b);
    d.axpy(1.0, b); // d = a - b
    d.max_abs()
}

// ---------------------------------------------------------------------------
// shared per-point field data
// ---------------------------------------------------------------------------

struct FieldData {
    /// xi value
    xi: DVector<f64>,
    /// nabla_{e_i^h} xi as columns
    nabla_h: Vec<DVector<f64>>,
    /// eta = nabla_zeta xi
    eta: DVector<f64>,
    /// D(e_i) = nabla^2 xi (zeta, e_i^h) as columns
    second: Vec<DVector<f64>>,
}

fn field_data(geom: &PointGeometry, xi: &VectorFieldOnM) -> Result<FieldData> {
    let n = geom.dim();
    let xi_jets = geom.field_jets(&xi.coeffs)?;
    let xi_val = geom.section_value(&xi_jets);
    let mut nabla_h = Vec::with_capacity(n);
    for i in 0..n {
        let w = geom.coordinate_lift(LiftAxis::Hor(i));
        nabla_h.push(geom.section_value(&geom.covariant_section(&w, &xi_jets)));
    }
    let eta_jets = geom.covariant_section(&geom.geodesic_field(), &xi_jets);
    let eta = geom.section_value(&eta_jets);
    // nabla^2 xi (zeta, X^h) = nabla_{X^h} (nabla_zeta xi), since
    // nabla_{X^h} rho(zeta) = nabla_{X^h} U = 0
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let w = geom.coordinate_lift(LiftAxis::Hor(i));
        second.push(geom.section_value(&geom.covariant_section(&w, &eta_jets)));
    }
    Ok(FieldData { xi: xi_val, nabla_h, eta, second })
}

struct EndoData {
    /// P as a matrix at the point
    p: DMatrix<f64>,
    /// S = P(U)
    s: DVector<f64>,
    /// (nabla_{e_i^h} P)(U) = nabla_{e_i^h}(P(U)) as columns
    nabla_s: Vec<DVector<f64>>,
}

fn endo_data(geom: &PointGeometry, p: &EndoSection) -> Result<EndoData> {
    let n = geom.dim();
    let vars = geom.coordinate_jets();
    let mut s_jets: Vec<Jet> = Vec::with_capacity(n);
    let mut pmat = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut acc = Jet::constant(vars[0].space(), 0.0);
        for j in 0..n {
            let pij = p.rows[i][j].eval(vars, &vars[0])?;
            pmat[(i, j)] = pij.value();
            acc = acc.add(&pij.mul(&vars[n + j]));
        }
        s_jets.push(acc);
    }
    let s = geom.section_value(&s_jets);
    let mut nabla_s = Vec::with_capacity(n);
    for i in 0..n {
        let w = geom.coordinate_lift(LiftAxis::Hor(i));
        nabla_s.push(geom.section_value(&geom.covariant_section(&w, &s_jets)));
    }
    Ok(EndoData { p: pmat, s, nabla_s })
}

fn basis(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
}

// ---------------------------------------------------------------------------
// closed-form Lie derivatives
// ---------------------------------------------------------------------------
//
// Every lifted field W handled here decomposes against the lifted frame, and
// the Levi-Civita property of the bundle connection turns the Lie derivative
// into the Killing form  (L_W G)(A, B) = G(nabla_A W, B) + G(nabla_B W, A).
// The covariant derivatives of the five lifts reduce to the connector
// tensors:
//
//   nabla_{X^h} h{S} = h{nabla_{X^h}S + P_hh(X,S)} + v{Q_hh(X,S)}
//   nabla_{X^v} h{S} = h{nabla_{X^v}S + P_hv(S,X)} + v{Q_hv(S,X) - Lbar(X,S)}
//   nabla_{X^h} v{S} = h{P_hv(X,S)} + v{nabla_{X^h}S + Q_hv(X,S)}
//   nabla_{X^v} v{S} = h{P_vv(S,X)} + v{nabla_{X^v}S + Q_vv(S,X)}
//
// with S the section carried by the lift (xi, P(U), or nabla_zeta xi for the
// vertical part of a complete lift). This is also how the expanded block
// formulas expand to; evaluating the connectors directly keeps
// one source of truth.

/// (h, v) parts of nabla_A W for every lifted frame axis A.
struct CovariantLift {
    h: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
}

fn killing_form(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    dw: &[CovariantLift; 2],
) -> Result<LieValue> {
    let n = geom.dim();
    let ps = spec.profiles_at(geom.r2())?;
    let gu = geom.gu();
    // G(h{a} + v{b}, .) against a horizontal / vertical coordinate axis
    let pair_h = |a: &DVector<f64>, b: &DVector<f64>, j: usize| -> f64 {
        ps.a13() * (geom.g() * a)[j]
            + ps.b13() * geom.g_dot_u(a) * gu[j]
            + ps.a2 * (geom.g() * b)[j]
            + ps.b2 * geom.g_dot_u(b) * gu[j]
    };
    let pair_v = |a: &DVector<f64>, b: &DVector<f64>, j: usize| -> f64 {
        ps.a2 * (geom.g() * a)[j]
            + ps.b2 * geom.g_dot_u(a) * gu[j]
            + ps.a1 * (geom.g() * b)[j]
            + ps.b1 * geom.g_dot_u(b) * gu[j]
    };
    let hor = &dw[0];
    let ver = &dw[1];
    let hh = DMatrix::from_fn(n, n, |i, j| {
        pair_h(&hor.h[i], &hor.v[i], j) + pair_h(&hor.h[j], &hor.v[j], i)
    });
    let hv = DMatrix::from_fn(n, n, |i, j| {
        pair_v(&hor.h[i], &hor.v[i], j) + pair_h(&ver.h[j], &ver.v[j], i)
    });
    let vv = DMatrix::from_fn(n, n, |i, j| {
        pair_v(&ver.h[i], &ver.v[i], j) + pair_v(&ver.h[j], &ver.v[j], i)
    });
    Ok(LieValue { hh, hv, vv })
}

/// nabla_A (h-lift of section S) over all frame axes; `s_jets` must carry at
/// least one derivative order.
fn covariant_of_hlift(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    s_jets: &[Jet],
) -> Result<[CovariantLift; 2]> {
    let n = geom.dim();
    let s_val = geom.section_value(s_jets);
    let mut hor = CovariantLift { h: Vec::with_capacity(n), v: Vec::with_capacity(n) };
    let mut ver = CovariantLift { h: Vec::with_capacity(n), v: Vec::with_capacity(n) };
    for i in 0..n {
        let e = basis(n, i);
        let wh = geom.coordinate_lift(LiftAxis::Hor(i));
        let nabla_h = geom.section_value(&geom.covariant_section(&wh, s_jets));
        let pq = crate::connection2::pq_tensors(spec, geom, &e, &s_val)?;
        hor.h.push(nabla_h + pq.phh);
        hor.v.push(pq.qhh);

        let wv = geom.coordinate_lift(LiftAxis::Ver(i));
        let nabla_v = geom.section_value(&geom.covariant_section(&wv, s_jets));
        let pq = crate::connection2::pq_tensors(spec, geom, &s_val, &e)?;
        let lbar = geom.landsberg_apply(&e, &s_val);
        ver.h.push(nabla_v + pq.phv);
        ver.v.push(pq.qhv - lbar);
    }
    Ok([hor, ver])
}

/// nabla_A (v-lift of section S) over all frame axes.
fn covariant_of_vlift(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    s_jets: &[Jet],
) -> Result<[CovariantLift; 2]> {
    let n = geom.dim();
    let s_val = geom.section_value(s_jets);
    let mut hor = CovariantLift { h: Vec::with_capacity(n), v: Vec::with_capacity(n) };
    let mut ver = CovariantLift { h: Vec::with_capacity(n), v: Vec::with_capacity(n) };
    for i in 0..n {
        let e = basis(n, i);
        let wh = geom.coordinate_lift(LiftAxis::Hor(i));
        let nabla_h = geom.section_value(&geom.covariant_section(&wh, s_jets));
        let pq = crate::connection2::pq_tensors(spec, geom, &e, &s_val)?;
        hor.h.push(pq.phv);
        hor.v.push(nabla_h + pq.qhv);

        let wv = geom.coordinate_lift(LiftAxis::Ver(i));
        let nabla_v = geom.section_value(&geom.covariant_section(&wv, s_jets));
        let pq = crate::connection2::pq_tensors(spec, geom, &s_val, &e)?;
        ver.h.push(pq.pvv);
        ver.v.push(nabla_v + pq.qvv);
    }
    Ok([hor, ver])
}

fn add_lifts(a: [CovariantLift; 2], b: [CovariantLift; 2]) -> [CovariantLift; 2] {
    let join = |x: CovariantLift, y: CovariantLift| CovariantLift {
        h: x.h.into_iter().zip(y.h).map(|(p, q)| p + q).collect(),
        v: x.v.into_iter().zip(y.v).map(|(p, q)| p + q).collect(),
    };
    let [ah, av] = a;
    let [bh, bv] = b;
    [join(ah, bh), join(av, bv)]
}

/// Lie derivative of G along the horizontal lift of xi.
pub fn lie_horizontal(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    xi: &VectorFieldOnM,
) -> Result<LieValue> {
    let xi_jets = geom.field_jets(&xi.coeffs)?;
    let dw = covariant_of_hlift(spec, geom, &xi_jets)?;
    killing_form(spec, geom, &dw)
}

/// Lie derivative of G along the vertical lift of xi.
pub fn lie_vertical(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    xi: &VectorFieldOnM,
) -> Result<LieValue> {
    let xi_jets = geom.field_jets(&xi.coeffs)?;
    let dw = covariant_of_vlift(spec, geom, &xi_jets)?;
    killing_form(spec, geom, &dw)
}

/// Lie derivative of G along the complete lift xi^c = xi^h + v{nabla_zeta xi}.
pub fn lie_complete(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    xi: &VectorFieldOnM,
) -> Result<LieValue> {
    let xi_jets = geom.field_jets(&xi.coeffs)?;
    let eta_jets = geom.covariant_section(&geom.geodesic_field(), &xi_jets);
    let dw = add_lifts(
        covariant_of_hlift(spec, geom, &xi_jets)?,
        covariant_of_vlift(spec, geom, &eta_jets)?,
    );
    killing_form(spec, geom, &dw)
}

fn transvection_jets(geom: &PointGeometry, p: &EndoSection) -> Result<Vec<Jet>> {
    let n = geom.dim();
    let vars = geom.coordinate_jets();
    let mut s_jets = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Jet::constant(vars[0].space(), 0.0);
        for j in 0..n {
            let pij = p.rows[i][j].eval(vars, &vars[0])?;
            acc = acc.add(&pij.mul(&vars[n + j]));
        }
        s_jets.push(acc);
    }
    Ok(s_jets)
}

/// Lie derivative of G along iota P = v{P(U)}.
pub fn lie_iota(spec: &FNaturalSpec, geom: &PointGeometry, p: &EndoSection) -> Result<LieValue> {
    let s_jets = transvection_jets(geom, p)?;
    let dw = covariant_of_vlift(spec, geom, &s_jets)?;
    killing_form(spec, geom, &dw)
}

/// Lie derivative of G along tau P = h{P(U)}.
pub fn lie_tau(spec: &FNaturalSpec, geom: &PointGeometry, p: &EndoSection) -> Result<LieValue> {
    let s_jets = transvection_jets(geom, p)?;
    let dw = covariant_of_hlift(spec, geom, &s_jets)?;
    killing_form(spec, geom, &dw)
}

// ---------------------------------------------------------------------------
// numeric oracle
// ---------------------------------------------------------------------------

/// A lifted field described by its ingredients, evaluable in coordinates at
/// any bundle point.
#[derive(Debug, Clone)]
pub enum BundleField {
    Horizontal(VectorFieldOnM),
    Vertical(VectorFieldOnM),
    Complete(VectorFieldOnM),
    Iota(EndoSection),
    Tau(EndoSection),
}

impl BundleField {
    /// Coordinate components (x parts then u parts) at a bundle point.
    pub fn coordinate_components(&self, model: &FinslerModel, q: &[f64]) -> Result<Vec<f64>> {
        let n = model.dim();
        let p = BundlePoint::from_coords(q)?;
        let mut out = vec![0.0; 2 * n];
        match self {
            BundleField::Horizontal(xi) => {
                let v = xi.value(&p.x)?;
                let geom = PointGeometry::light(model, &p)?;
                let nv = geom.nconn() * &v;
                for i in 0..n {
                    out[i] = v[i];
                    out[n + i] = -nv[i];
                }
            }
            BundleField::Vertical(xi) => {
                let v = xi.value(&p.x)?;
                for i in 0..n {
                    out[n + i] = v[i];
                }
            }
            BundleField::Complete(xi) => {
                let v = xi.value(&p.x)?;
                // u-part: (d xi^i/dx^j) u^j
                let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
                let _ = names;
                for i in 0..n {
                    out[i] = v[i];
                }
                for i in 0..n {
                    let e = &xi.coeffs[i];
                    let mut acc = 0.0;
                    for j in 0..n {
                        let d = partial_fd(
                            &|x: &[f64]| e.eval_f64(x),
                            &p.x,
                            &[j],
                            StepPolicy::Fixed(1e-5),
                        )?;
                        acc += d * p.u[j];
                    }
                    out[n + i] = acc;
                }
            }
            BundleField::Iota(endo) => {
                let m = endo.value(q)?;
                let s = m * DVector::from_vec(p.u.clone());
                for i in 0..n {
                    out[n + i] = s[i];
                }
            }
            BundleField::Tau(endo) => {
                let m = endo.value(q)?;
                let s = m * DVector::from_vec(p.u.clone());
                let geom = PointGeometry::light(model, &p)?;
                let ns = geom.nconn() * &s;
                for i in 0..n {
                    out[i] = s[i];
                    out[n + i] = -ns[i];
                }
            }
        }
        Ok(out)
    }
}

/// Finite-difference data for the Lie oracle at one point: the coordinate
/// metric and its first derivatives. Build once, evaluate several fields.
pub struct LieOracle {
    coords: Vec<f64>,
    m0: DMatrix<f64>,
    dm: Vec<DMatrix<f64>>,
}

impl LieOracle {
    pub fn new(spec: &FNaturalSpec, geom: &PointGeometry) -> Result<LieOracle> {
        let n = geom.dim();
        let dim = 2 * n;
        let model = geom.model();
        let ps = spec.profiles_at(geom.r2())?;
        if ps.alpha().abs() < 1e-10 || ps.phi().abs() < 1e-10 {
            return Err(Error::DegenerateMetric(format!(
                "alpha = {:.3e}, phi = {:.3e}",
                ps.alpha(),
                ps.phi()
            )));
        }
        let coords = geom.point().coords();
        let m_at = |q: &[f64]| -> Result<DMatrix<f64>> {
            let bp = BundlePoint::from_coords(q)?;
            let g = PointGeometry::light(model, &bp)?;
            Ok(evaluate_g(spec, &g)?.m2n)
        };
        let m0 = m_at(&coords)?;
        let mut dm: Vec<DMatrix<f64>> = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut d = DMatrix::zeros(dim, dim);
            for r in 0..dim {
                for s in r..dim {
                    let f = |q: &[f64]| Ok(m_at(q)?[(r, s)]);
                    let v = partial_fd(&f, &coords, &[c], StepPolicy::Auto)?;
                    d[(r, s)] = v;
                    d[(s, r)] = v;
                }
            }
            dm.push(d);
        }
        Ok(LieOracle { coords, m0, dm })
    }

    /// (L_W G)_AB = W^C d_C G_AB + G_CB d_A W^C + G_AC d_B W^C in
    /// coordinates, transformed to the lifted frame at the end.
    pub fn evaluate(&self, geom: &PointGeometry, field: &BundleField) -> Result<LieValue> {
        let n = geom.dim();
        let dim = 2 * n;
        let model = geom.model();
        let w0 = DVector::from_vec(field.coordinate_components(model, &self.coords)?);
        let mut dw: Vec<DVector<f64>> = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut dv = DVector::zeros(dim);
            for a in 0..dim {
                let f = |q: &[f64]| Ok(field.coordinate_components(model, q)?[a]);
                dv[a] = partial_fd(&f, &self.coords, &[c], StepPolicy::Auto)?;
            }
            dw.push(dv);
        }

        let mut lam = DMatrix::<f64>::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                let mut v = 0.0;
                for c in 0..dim {
                    v += w0[c] * self.dm[c][(a, b)];
                    v += self.m0[(c, b)] * dw[a][c];
                    v += self.m0[(a, c)] * dw[b][c];
                }
                lam[(a, b)] = v;
            }
        }

        // transform to the lifted frame: delta/dx^i has coordinates (e_i, -N e_i)
        let nmat = geom.nconn();
        let mut e_h = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = DVector::zeros(dim);
            v[i] = 1.0;
            for k in 0..n {
                v[n + k] = -nmat[(k, i)];
            }
            e_h.push(v);
        }
        let e_v: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                let mut v = DVector::zeros(dim);
                v[n + i] = 1.0;
                v
            })
            .collect();
        let form = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &lam * b)[(0, 0)];
        Ok(LieValue {
            hh: DMatrix::from_fn(n, n, |i, j| form(&e_h[i], &e_h[j])),
            hv: DMatrix::from_fn(n, n, |i, j| form(&e_h[i], &e_v[j])),
            vv: DMatrix::from_fn(n, n, |i, j| form(&e_v[i], &e_v[j])),
        })
    }
}

/// One-shot numeric Lie derivative; see [`LieOracle`] for batch use.
pub fn lie_numeric_oracle(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    field: &BundleField,
) -> Result<LieValue> {
    LieOracle::new(spec, geom)?.evaluate(geom, field)
}

// ---------------------------------------------------------------------------
// verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum VerdictKind {
    Killing,
    Homothetic(f64),
    Conformal,
    /// "none": not conformal for any potential function.
    NotConformal,
}

/// One named residual entering a verdict.
#[derive(Debug, Clone)]
pub struct Condition {
    pub name: &'static str,
    pub residual: f64,
}

/// The conformal factor, always in closed form.
#[derive(Debug, Clone)]
pub enum ThetaForm {
    Zero,
    Constant(f64),
    /// (alpha_1'/alpha_1)(r^2) g(xi, U)
    VerticalLift(VectorFieldOnM),
    /// g(nabla_zeta xi, U) / r^2
    CompleteLift(VectorFieldOnM),
    /// 1 + t lambda'(t)/lambda(t) with lambda = alpha_1
    Liouville,
}

/// Evaluate a conformal factor at a point.
pub fn theta_value(form: &ThetaForm, spec: &FNaturalSpec, geom: &PointGeometry) -> Result<f64> {
    match form {
        ThetaForm::Zero => Ok(0.0),
        ThetaForm::Constant(c) => Ok(*c),
        ThetaForm::VerticalLift(xi) => {
            let t = geom.r2();
            let a1 = spec.a1.eval(t)?;
            if a1.abs() < 1e-14 {
                return Err(Error::DegenerateMetric("alpha_1 vanished".into()));
            }
            let xi_v = xi.value(&geom.point().x)?;
            Ok(spec.a1.d1(t)? / a1 * geom.g_dot_u(&xi_v))
        }
        ThetaForm::CompleteLift(xi) => {
            let xi_jets = geom.field_jets(&xi.coeffs)?;
            let eta = geom.section_value(&geom.covariant_section(&geom.geodesic_field(), &xi_jets));
            Ok(geom.g_dot_u(&eta) / geom.r2())
        }
        ThetaForm::Liouville => {
            let t = geom.r2();
            let a1 = spec.a1.eval(t)?;
            if a1.abs() < 1e-14 {
                return Err(Error::DegenerateMetric("alpha_1 vanished".into()));
            }
            Ok(1.0 + t * spec.a1.d1(t)? / a1)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConformalVerdict {
    pub kind: VerdictKind,
    pub conditions: Vec<Condition>,
    /// Worst sample point and its residual.
    pub witness: Option<(BundlePoint, f64)>,
    pub theta: ThetaForm,
}

fn require_kk(spec: &FNaturalSpec) -> Result<()> {
    if !spec.is_kk_type() {
        return Err(Error::NotKkType(
            "verdict requires alpha_2 = beta_2 = 0".into(),
        ));
    }
    Ok(())
}

struct ResidualTable {
    names: Vec<&'static str>,
    values: Vec<f64>,
    worst: Option<(BundlePoint, f64)>,
}

impl ResidualTable {
    fn new(names: Vec<&'static str>) -> ResidualTable {
        let len = names.len();
        ResidualTable { names, values: vec![0.0; len], worst: None }
    }

    fn update(&mut self, point: &BundlePoint, residuals: &[f64]) {
        let mut point_max = 0.0f64;
        for (slot, &r) in self.values.iter_mut().zip(residuals) {
            *slot = slot.max(r);
            point_max = point_max.max(r);
        }
        if self.worst.as_ref().is_none_or(|(_, w)| point_max > *w) {
            self.worst = Some((point.clone(), point_max));
        }
    }

    fn conditions(&self) -> Vec<Condition> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(name, &residual)| Condition { name, residual })
            .collect()
    }

    fn all_below(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v < tol)
    }
}

/// Max block deviation of (L_W G - 2 theta G) at one point.
fn conformal_block_residual(
    spec: &FNaturalSpec,
    geom: &PointGeometry,
    blocks: &LieValue,
    theta: f64,
) -> Result<f64> {
    let g = evaluate_g(spec, geom)?;
    let d_hh = (&blocks.hh - 2.0 * theta * &g.ghh).abs().max();
    let d_hv = (&blocks.hv - 2.0 * theta * &g.ghv).abs().max();
    let d_vv = (&blocks.vv - 2.0 * theta * &g.gvv).abs().max();
    Ok(d_hh.max(d_hv).max(d_vv))
}

/// Killing test for horizontal lifts over a Kaluza-Klein-type metric:
/// conformal and Killing coincide, so the verdict is Killing or none.
pub fn verdict_horizontal(
    spec: &FNaturalSpec,
    model: &FinslerModel,
    xi: &VectorFieldOnM,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    require_kk(spec)?;
    let mut table = ResidualTable::new(vec![
        "killing_on_base",
        "curvature_coupling",
        "landsberg_contraction",
        "lie_blocks",
    ]);
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let n = geom.dim();
        let fdata = field_data(&geom, xi)?;
        let u = geom.u();
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        let mut c3 = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (basis(n, i), basis(n, j));
                c1 = c1.max(
                    (geom.g_dot(&fdata.nabla_h[i], &y) + geom.g_dot(&fdata.nabla_h[j], &x)).abs(),
                );
                c2 = c2.max(
                    (2.0 * geom.curv_low(u, &y, &fdata.xi, &x)
                        + geom.curv_low(u, &x, &fdata.xi, &y)
                        + geom.curv_low(u, &x, &y, &fdata.xi))
                    .abs(),
                );
                c3 = c3.max(geom.landsberg_full(&fdata.xi, &x, &y).abs());
            }
        }
        let blocks = lie_horizontal(spec, &geom, xi)?;
        table.update(p, &[c1, c2, c3, blocks.max_abs()]);
    }
    let kind = if table.all_below(tol) { VerdictKind::Killing } else { VerdictKind::NotConformal };
    Ok(ConformalVerdict {
        kind,
        conditions: table.conditions(),
        witness: table.worst,
        theta: ThetaForm::Zero,
    })
}

/// Conformal test for vertical lifts over a Kaluza-Klein-type metric.
pub fn verdict_vertical(
    spec: &FNaturalSpec,
    model: &FinslerModel,
    xi: &VectorFieldOnM,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    require_kk(spec)?;
    let grid = default_t_grid();
    let mut beta1_max = 0.0f64;
    let mut ratio = Vec::with_capacity(grid.len());
    let mut a1p_max = 0.0f64;
    for &t in &grid {
        beta1_max = beta1_max.max(spec.b1.eval(t)?.abs());
        let a1 = spec.a1.eval(t)?;
        let a3 = spec.a3.eval(t)?;
        if a1.abs() < 1e-12 {
            return Err(Error::DegenerateMetric(format!("alpha_1(t) = 0 at t = {t}")));
        }
        ratio.push((a1 + a3) / a1);
        a1p_max = a1p_max.max(spec.a1.d1(t)?.abs());
    }
    let lambda = ratio.iter().sum::<f64>() / ratio.len() as f64;
    let ratio_res = ratio.iter().map(|r| (r - lambda).abs()).fold(0.0f64, f64::max);

    let theta = ThetaForm::VerticalLift(xi.clone());
    let mut table = ResidualTable::new(vec![
        "beta1_zero",
        "proportional_sums",
        "cartan_contraction",
        "nabla_plus_landsberg",
        "berwald_coupling",
        "conformal_factor",
    ]);
    let mut xi_max = 0.0f64;
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let n = geom.dim();
        let fdata = field_data(&geom, xi)?;
        xi_max = xi_max.max(fdata.xi.abs().max());
        let u = geom.u();
        let mut c2 = 0.0f64;
        let mut c3 = 0.0f64;
        let mut c4 = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (basis(n, i), basis(n, j));
                c2 = c2.max(geom.cartan_full(&fdata.xi, &x, &y).abs());
                c3 = c3.max(
                    (geom.g_dot(&fdata.nabla_h[i], &y) + geom.landsberg_full(&x, &y, &fdata.xi))
                        .abs(),
                );
                c4 = c4.max(
                    (2.0 * geom.berwald_full(&x, &y, u, &fdata.xi)
                        - geom.berwald_full(&x, &fdata.xi, &y, u)
                        - geom.berwald_full(&y, &fdata.xi, &x, u))
                    .abs(),
                );
            }
        }
        let blocks = lie_vertical(spec, &geom, xi)?;
        let th = theta_value(&theta, spec, &geom)?;
        let factor_res = conformal_block_residual(spec, &geom, &blocks, th)?;
        table.update(p, &[beta1_max, ratio_res, c2, c3, c4, factor_res]);
    }
    let kind = if table.all_below(tol) {
        if a1p_max < tol || xi_max < tol {
            VerdictKind::Killing
        } else {
            VerdictKind::Conformal
        }
    } else {
        VerdictKind::NotConformal
    };
    let theta = if kind == VerdictKind::Killing { ThetaForm::Zero } else { theta };
    Ok(ConformalVerdict { kind, conditions: table.conditions(), witness: table.worst, theta })
}

/// Killing test for complete lifts under the Sasaki metric (conformal and
/// Killing coincide there).
pub fn verdict_complete_sasaki(
    model: &FinslerModel,
    xi: &VectorFieldOnM,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    let spec = FNaturalSpec::sasaki();
    let mut table = ResidualTable::new(vec![
        "base_killing",
        "landsberg_contraction",
        "berwald_coupling",
        "second_derivative_coupling",
        "lie_blocks",
    ]);
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let n = geom.dim();
        let fdata = field_data(&geom, xi)?;
        let u = geom.u();
        let eta = &fdata.eta;
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        let mut c3 = 0.0f64;
        let mut c4 = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (basis(n, i), basis(n, j));
                c1 = c1.max(
                    (geom.g_dot(&fdata.nabla_h[i], &y)
                        + geom.g_dot(&fdata.nabla_h[j], &x)
                        + 2.0 * geom.cartan_full(&x, &y, eta))
                    .abs(),
                );
                c2 = c2.max(geom.landsberg_full(&fdata.xi, &x, &y).abs());
                c3 = c3.max(
                    (2.0 * geom.berwald_full(&x, &y, u, eta)
                        - geom.berwald_full(&x, eta, &y, u)
                        - geom.berwald_full(&y, eta, &x, u))
                    .abs(),
                );
                c4 = c4.max(
                    (geom.curv_low(u, &y, &fdata.xi, &x)
                        + geom.berwald_full(&y, &fdata.xi, u, &x)
                        + geom.g_dot(&fdata.second[i], &y)
                        + geom.landsberg_full(&x, &y, eta))
                    .abs(),
                );
            }
        }
        let blocks = lie_complete(&spec, &geom, xi)?;
        table.update(p, &[c1, c2, c3, c4, blocks.max_abs()]);
    }
    let kind = if table.all_below(tol) { VerdictKind::Killing } else { VerdictKind::NotConformal };
    Ok(ConformalVerdict {
        kind,
        conditions: table.conditions(),
        witness: table.worst,
        theta: ThetaForm::Zero,
    })
}

/// Conformal test for complete lifts under the Cheeger-Gromoll metric, with
/// potential theta = g(nabla_zeta xi, U)/r^2.
pub fn verdict_complete_cg(
    model: &FinslerModel,
    xi: &VectorFieldOnM,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    let spec = FNaturalSpec::cheeger_gromoll();
    let theta = ThetaForm::CompleteLift(xi.clone());
    let mut table = ResidualTable::new(vec![
        "base_conformal",
        "berwald_coupling",
        "second_derivative_coupling",
        "radial_second_derivative",
        "mixed_radial",
        "landsberg_radial",
        "conformal_factor",
    ]);
    let mut thetas = Vec::with_capacity(points.len());
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let n = geom.dim();
        let fdata = field_data(&geom, xi)?;
        let u = geom.u();
        let eta = &fdata.eta;
        let r2 = geom.r2();
        let th = geom.g_dot_u(eta) / r2;
        thetas.push(th);
        let getau = geom.g_dot_u(eta);
        let mut c = [0.0f64; 6];
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (basis(n, i), basis(n, j));
                let gxu = geom.gu()[i];
                let gyu = geom.gu()[j];
                c[0] = c[0].max(
                    (geom.g_dot(&fdata.nabla_h[i], &y)
                        + geom.g_dot(&fdata.nabla_h[j], &x)
                        + 2.0 * geom.cartan_full(&x, &y, eta)
                        - 2.0 * th * geom.g()[(i, j)])
                    .abs(),
                );
                c[1] = c[1].max(
                    (2.0 * geom.berwald_full(&x, &y, u, eta)
                        - geom.berwald_full(&x, eta, &y, u)
                        - geom.berwald_full(&y, eta, &x, u))
                    .abs(),
                );
                c[2] = c[2].max(
                    (geom.curv_low(u, &y, &fdata.xi, &x)
                        + geom.berwald_full(&y, &fdata.xi, u, &x)
                        + geom.g_dot(&fdata.second[i], &y)
                        + geom.landsberg_full(&x, &y, eta))
                    .abs(),
                );
                c[4] = c[4].max(
                    ((geom.g_dot_u(&fdata.nabla_h[i]) + geom.g_dot(&x, eta)) * gyu
                        + (geom.g_dot_u(&fdata.nabla_h[j]) + geom.g_dot(&y, eta)) * gxu
                        - 4.0 / r2 * gxu * gyu * getau)
                    .abs(),
                );
                c[5] = c[5].max(
                    (-2.0 * geom.landsberg_full(&x, &y, &fdata.xi)
                        - (2.0 / (1.0 + r2) * geom.g()[(i, j)]
                            - 2.0 / (r2 * (1.0 + r2)) * gxu * gyu)
                            * getau)
                    .abs(),
                );
            }
        }
        let mut c3v = 0.0f64;
        for i in 0..n {
            c3v = c3v.max(geom.g_dot_u(&fdata.second[i]).abs());
        }
        let blocks = lie_complete(&spec, &geom, xi)?;
        let factor_res = conformal_block_residual(&spec, &geom, &blocks, th)?;
        table.update(p, &[c[0], c[1], c[2], c3v, c[4], c[5], factor_res]);
    }
    let kind = if table.all_below(tol) {
        let tmax = thetas.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let mean = thetas.iter().sum::<f64>() / thetas.len().max(1) as f64;
        let spread = thetas.iter().map(|t| (t - mean).abs()).fold(0.0f64, f64::max);
        if tmax < tol {
            VerdictKind::Killing
        } else if spread < tol {
            VerdictKind::Homothetic(mean)
        } else {
            VerdictKind::Conformal
        }
    } else {
        VerdictKind::NotConformal
    };
    let theta = if kind == VerdictKind::Killing { ThetaForm::Zero } else { theta };
    Ok(ConformalVerdict { kind, conditions: table.conditions(), witness: table.worst, theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IotaMetric {
    Sasaki,
    CheegerGromoll,
}

/// Killing test for iota P = v{P(U)} under the Sasaki or Cheeger-Gromoll
/// metric (conformal and Killing coincide).
pub fn verdict_iota(
    model: &FinslerModel,
    p_section: &EndoSection,
    metric: IotaMetric,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    let spec = match metric {
        IotaMetric::Sasaki => FNaturalSpec::sasaki(),
        IotaMetric::CheegerGromoll => FNaturalSpec::cheeger_gromoll(),
    };
    let mut table = ResidualTable::new(vec![
        "skew_symmetry",
        "berwald_coupling",
        "nabla_plus_landsberg",
        "cartan_contraction",
        "lie_blocks",
    ]);
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let n = geom.dim();
        let ed = endo_data(&geom, p_section)?;
        let u = geom.u();
        let s = &ed.s;
        let mut c = [0.0f64; 4];
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (basis(n, i), basis(n, j));
                let px = DVector::from_fn(n, |r, _| ed.p[(r, i)]);
                let py = DVector::from_fn(n, |r, _| ed.p[(r, j)]);
                c[0] = c[0].max((geom.g_dot(&px, &y) + geom.g_dot(&py, &x)).abs());
                c[1] = c[1].max(
                    (2.0 * geom.berwald_full(&x, &y, u, s)
                        - geom.berwald_full(&x, s, &y, u)
                        - geom.berwald_full(&y, s, &x, u))
                    .abs(),
                );
                c[2] = c[2].max(
                    (geom.g_dot(&ed.nabla_s[i], &y) + geom.landsberg_full(&x, &y, s)).abs(),
                );
                c[3] = c[3].max(geom.cartan_full(s, &x, &y).abs());
            }
        }
        let blocks = lie_iota(&spec, &geom, p_section)?;
        table.update(p, &[c[0], c[1], c[2], c[3], blocks.max_abs()]);
    }
    let kind = if table.all_below(tol) { VerdictKind::Killing } else { VerdictKind::NotConformal };
    Ok(ConformalVerdict {
        kind,
        conditions: table.conditions(),
        witness: table.worst,
        theta: ThetaForm::Zero,
    })
}

/// Result of classifying the Liouville field for a Kaluza-Klein-type spec.
#[derive(Debug, Clone)]
pub struct LiouvilleClassification {
    pub kind: VerdictKind,
    pub conditions: Vec<Condition>,
    /// Fitted family constants (a1, a2, a3, b1, b2, b3).
    pub constants: [f64; 6],
}

/// Decide whether the Liouville field v{U} is conformal, homothetic or
/// Killing by fitting the radial power-law families over the energy samples.
///
/// With lambda = alpha_1 (alpha_1 cannot vanish for a non-degenerate
/// Kaluza-Klein-type spec) the family reads alpha_1 = a1 lambda,
/// alpha_1 + alpha_3 = a3 t lambda, beta_1 = b1 lambda / t,
/// beta_1 + beta_3 = b3 lambda, and the potential is
/// theta(t) = 1 + t lambda'(t)/lambda(t).
pub fn classify_liouville(
    spec: &FNaturalSpec,
    t_samples: &[f64],
    tol: f64,
) -> Result<LiouvilleClassification> {
    require_kk(spec)?;
    let mut lam = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let ps = spec.profiles_at(t)?;
        if ps.alpha().abs() < 1e-10 || ps.phi().abs() < 1e-10 {
            return Err(Error::DegenerateMetric(format!("degenerate at t = {t}")));
        }
        if ps.a1.abs() < 1e-12 {
            return Err(Error::DegenerateMetric(format!("alpha_1(t) = 0 at t = {t}")));
        }
        lam.push(ps.a1);
    }
    // least-squares constants against the family shapes
    let fit = |targets: &[f64], shapes: &[f64]| -> (f64, f64) {
        let denom: f64 = shapes.iter().map(|s| s * s).sum();
        let c = if denom > 1e-14 {
            targets.iter().zip(shapes).map(|(y, s)| y * s).sum::<f64>() / denom
        } else {
            0.0
        };
        let res = targets
            .iter()
            .zip(shapes)
            .map(|(y, s)| (y - c * s).abs())
            .fold(0.0f64, f64::max);
        (c, res)
    };
    let mut a13v = Vec::new();
    let mut b1v = Vec::new();
    let mut b13v = Vec::new();
    let mut a2v = Vec::new();
    let mut b2v = Vec::new();
    let mut shape_t_lam = Vec::new();
    let mut shape_lam_over_t = Vec::new();
    for (k, &t) in t_samples.iter().enumerate() {
        let ps = spec.profiles_at(t)?;
        a13v.push(ps.a13());
        b1v.push(ps.b1);
        b13v.push(ps.b13());
        a2v.push(ps.a2);
        b2v.push(ps.b2);
        shape_t_lam.push(t * lam[k]);
        shape_lam_over_t.push(lam[k] / t);
    }
    let (a3c, a3res) = fit(&a13v, &shape_t_lam);
    let (b1c, b1res) = fit(&b1v, &shape_lam_over_t);
    let (b3c, b3res) = fit(&b13v, &lam);
    let a2res = a2v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b2res = b2v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a1c = 1.0;

    let nondeg1 = (a1c * a3c).abs();
    let nondeg2 = ((a1c + b1c) * (a3c + b3c)).abs();

    let mut thetas = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let a1 = spec.a1.eval(t)?;
        thetas.push(1.0 + t * spec.a1.d1(t)? / a1);
    }
    let theta_max = thetas.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let theta_mean = thetas.iter().sum::<f64>() / thetas.len().max(1) as f64;
    let theta_spread = thetas.iter().map(|t| (t - theta_mean).abs()).fold(0.0f64, f64::max);

    let conditions = vec![
        Condition { name: "alpha13_proportional", residual: a3res },
        Condition { name: "beta1_proportional", residual: b1res },
        Condition { name: "beta13_proportional", residual: b3res },
        Condition { name: "alpha2_zero", residual: a2res },
        Condition { name: "beta2_zero", residual: b2res },
        Condition { name: "theta_spread", residual: theta_spread },
    ];
    let proportional =
        a3res < tol && b1res < tol && b3res < tol && a2res < tol && b2res < tol;
    let kind = if proportional && nondeg1 > 1e-9 && nondeg2 > 1e-9 {
        if theta_max < tol {
            VerdictKind::Killing
        } else if theta_spread < tol {
            VerdictKind::Homothetic(theta_mean)
        } else {
            VerdictKind::Conformal
        }
    } else {
        VerdictKind::NotConformal
    };
    Ok(LiouvilleClassification {
        kind,
        conditions,
        constants: [a1c, 0.0, a3c, b1c, 0.0, b3c],
    })
}

/// Inconsistency evidence that the geodesic field cannot be conformal: the
/// three radial equations `theta (phi1+phi3) = 0`, `2 theta phi2 = phi1+phi3`
/// and `theta phi1 = phi2` admit no common solution unless phi = 0.
#[derive(Debug, Clone)]
pub struct GeodesicCheck {
    pub kind: VerdictKind,
    /// Per-sampled-energy: (t, best residual over all candidate thetas).
    pub system_witness: Vec<(f64, f64)>,
    /// Deviation of L_zeta G from the best-fitting multiple of G, per point.
    pub block_residual: f64,
    pub witness: Option<(BundlePoint, f64)>,
}

/// Verify that the geodesic field (and tau P for a non-zero endomorphism
/// under a Kaluza-Klein metric) is not conformal.
pub fn geodesic_conformal_check(
    spec: &FNaturalSpec,
    model: &FinslerModel,
    points: &[BundlePoint],
    tol: f64,
) -> Result<GeodesicCheck> {
    let identity = EndoSection::identity(model.dim());
    let mut system_witness = Vec::with_capacity(points.len());
    let mut block_residual = 0.0f64;
    let mut worst: Option<(BundlePoint, f64)> = None;
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let ps = spec.profiles_at(geom.r2())?;
        if ps.alpha().abs() < 1e-10 || ps.phi().abs() < 1e-10 {
            return Err(Error::DegenerateMetric(format!("degenerate at t = {}", geom.r2())));
        }
        // candidate thetas from each solvable equation
        let mut candidates = vec![0.0f64];
        if ps.phi1().abs() > 1e-12 {
            candidates.push(ps.phi2() / ps.phi1());
        }
        if ps.phi2().abs() > 1e-12 {
            candidates.push(ps.phi13() / (2.0 * ps.phi2()));
        }
        let best = candidates
            .iter()
            .map(|&th| {
                let e1 = (th * ps.phi13()).abs();
                let e2 = (2.0 * th * ps.phi2() - ps.phi13()).abs();
                let e3 = (th * ps.phi1() - ps.phi2()).abs();
                e1.max(e2).max(e3)
            })
            .fold(f64::INFINITY, f64::min);
        system_witness.push((geom.r2(), best));

        // direct route: L_zeta G deviates from every multiple of G
        let blocks = lie_tau(spec, &geom, &identity)?;
        let g = evaluate_g(spec, &geom)?;
        let dot = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a.transpose() * b).trace();
        let num = dot(&blocks.hh, &g.ghh) + 2.0 * dot(&blocks.hv, &g.ghv) + dot(&blocks.vv, &g.gvv);
        let den = dot(&g.ghh, &g.ghh) + 2.0 * dot(&g.ghv, &g.ghv) + dot(&g.gvv, &g.gvv);
        let th_fit = num / (2.0 * den);
        let dev = conformal_block_residual(spec, &geom, &blocks, th_fit)?;
        block_residual = block_residual.max(dev);
        if worst.as_ref().is_none_or(|(_, w)| dev > *w) {
            worst = Some((p.clone(), dev));
        }
    }
    let inconsistent = system_witness.iter().all(|(_, r)| *r > 10.0 * tol);
    let kind = if inconsistent && block_residual > 10.0 * tol {
        VerdictKind::NotConformal
    } else {
        // should not happen for a nondegenerate spec; report honestly
        VerdictKind::Conformal
    };
    Ok(GeodesicCheck { kind, system_witness, block_residual, witness: worst })
}

/// The tau P obstruction under a Kaluza-Klein metric: a witness with
/// g(X, P(U)) != 0 rules out any conformal tau P.
pub fn tau_conformal_check(
    spec: &FNaturalSpec,
    model: &FinslerModel,
    p_section: &EndoSection,
    points: &[BundlePoint],
    tol: f64,
) -> Result<ConformalVerdict> {
    require_kk(spec)?;
    let grid = default_t_grid();
    for &t in &grid {
        if spec.b1.eval(t)?.abs() + spec.b3.eval(t)?.abs() > 1e-10 {
            return Err(Error::NotKkType(
                "tau check requires a Kaluza-Klein metric (beta_1 + beta_3 = 0)".into(),
            ));
        }
    }
    let mut table = ResidualTable::new(vec!["transvection_nonzero", "lie_blocks_vs_conformal"]);
    let mut smax = 0.0f64;
    for p in points {
        let geom = PointGeometry::new(model, p)?;
        let ed = endo_data(&geom, p_section)?;
        let witness_val = ed.s.abs().max();
        smax = smax.max(witness_val);
        let blocks = lie_tau(spec, &geom, p_section)?;
        let g = evaluate_g(spec, &geom)?;
        let dot = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a.transpose() * b).trace();
        let num = dot(&blocks.hh, &g.ghh) + 2.0 * dot(&blocks.hv, &g.ghv) + dot(&blocks.vv, &g.gvv);
        let den = dot(&g.ghh, &g.ghh) + 2.0 * dot(&g.ghv, &g.ghv) + dot(&g.gvv, &g.gvv);
        let dev = conformal_block_residual(spec, &geom, &blocks, num / (2.0 * den))?;
        table.update(p, &[witness_val, dev]);
    }
    let kind = if smax < 1e-12 {
        // the zero section: tau P = 0 is trivially Killing
        VerdictKind::Killing
    } else if table.values[1] > 10.0 * tol {
        VerdictKind::NotConformal
    } else {
        VerdictKind::Conformal
    };
    Ok(ConformalVerdict {
        kind,
        conditions: table.conditions(),
        witness: table.worst,
        theta: ThetaForm::Zero,
    })
}
