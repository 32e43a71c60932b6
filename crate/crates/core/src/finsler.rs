//! Finsler structures on a chart: the squared norm F^2, the fundamental
//! tensor g_ij = 1/2 d^2F^2/du^i du^j, the Cartan tensor C_ijk = 1/4 d^3F^2
//! and its metric contraction.

use nalgebra::{DMatrix, DVector};

use crate::derivkit::{taylor_jet, Jet, Scalar};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tensor::Tensor3;

/// A point (x, u) of the slit tangent bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Result<BundlePoint> {
        if x.len() != u.len() {
            return Err(Error::Invalid(format!(
                "base point dim {} != direction dim {}",
                x.len(),
                u.len()
            )));
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(Error::Domain(
                "direction too close to the zero section (|u| <= 1e-12)".into(),
            ));
        }
        Ok(BundlePoint { x, u })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Chart coordinates as one slice (x followed by u).
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.x.clone();
        c.extend_from_slice(&self.u);
        c
    }

    pub fn from_coords(q: &[f64]) -> Result<BundlePoint> {
        let n = q.len() / 2;
        BundlePoint::new(q[..n].to_vec(), q[n..].to_vec())
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// F^2 = a_ij(x) u^i u^j with a symmetric positive definite.
    Riemannian { metric: Vec<Vec<Expr>> },
    /// F = sqrt(a_ij(x) u^i u^j) + b_i(x) u^i with |b|_a < 1.
    Randers { metric: Vec<Vec<Expr>>, covector: Vec<Expr> },
    /// F^2 supplied directly as an expression in x1..xn, u1..un.
    Custom { f2: Expr },
}

/// A Finsler structure on one chart.
#[derive(Debug, Clone)]
pub struct FinslerModel {
    n: usize,
    family: Family,
}

/// Fundamental tensor at a point, with its inverse and the energy r^2.
#[derive(Debug, Clone)]
pub struct MetricValue {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub r2: f64,
}

impl FinslerModel {
    pub fn euclidean(n: usize) -> FinslerModel {
        let metric = (0..n)
            .map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        FinslerModel { n, family: Family::Riemannian { metric } }
    }

    pub fn riemannian(n: usize, metric: Vec<Vec<Expr>>) -> Result<FinslerModel> {
        check_matrix_shape(&metric, n)?;
        Ok(FinslerModel { n, family: Family::Riemannian { metric } })
    }

    /// Conformally flat metric a_ij = factor(x) * delta_ij.
    pub fn conformal_euclidean(n: usize, factor: Expr) -> FinslerModel {
        let metric = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            factor.clone()
                        } else {
                            Expr::constant(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        FinslerModel { n, family: Family::Riemannian { metric } }
    }

    /// Randers norm. Admissibility (sup_x |b|_a < 1) is enforced on a coarse
    /// grid over the chart box `[-box_half, box_half]^n` at construction.
    pub fn randers(
        n: usize,
        metric: Vec<Vec<Expr>>,
        covector: Vec<Expr>,
        box_half: f64,
    ) -> Result<FinslerModel> {
        check_matrix_shape(&metric, n)?;
        if covector.len() != n {
            return Err(Error::Invalid(format!(
                "covector has {} entries, expected {n}",
                covector.len()
            )));
        }
        let model = FinslerModel { n, family: Family::Randers { metric, covector } };
        model.check_randers_admissible(box_half)?;
        Ok(model)
    }

    /// Flat Randers: a = identity, b as given.
    pub fn randers_flat(n: usize, covector: Vec<Expr>, box_half: f64) -> Result<FinslerModel> {
        let metric = (0..n)
            .map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        FinslerModel::randers(n, metric, covector, box_half)
    }

    pub fn custom(n: usize, f2: Expr) -> FinslerModel {
        FinslerModel { n, family: Family::Custom { f2 } }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(self.family, Family::Riemannian { .. })
    }

    /// Base metric a_ij(x) for the Riemannian and Randers families.
    pub fn base_metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let metric = match &self.family {
            Family::Riemannian { metric } => metric,
            Family::Randers { metric, .. } => metric,
            Family::Custom { .. } => {
                return Err(Error::Invalid("custom family has no base metric".into()))
            }
        };
        let n = self.n;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = metric[i][j].eval_f64(x)?;
            }
        }
        Ok(a)
    }

    fn check_randers_admissible(&self, box_half: f64) -> Result<()> {
        let Family::Randers { covector, .. } = &self.family else {
            return Ok(());
        };
        let steps = 5usize;
        let mut grid_point = vec![0usize; self.n];
        loop {
            let x: Vec<f64> = grid_point
                .iter()
                .map(|&g| -box_half + 2.0 * box_half * g as f64 / (steps - 1) as f64)
                .collect();
            let a = self.base_metric_at(&x)?;
            let ainv = a
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::SingularMetric("base metric not invertible".into()))?;
            let b = DVector::from_fn(self.n, |i, _| covector[i].eval_f64(&x).unwrap_or(f64::NAN));
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("covector not evaluable on the chart box".into()));
            }
            let norm2 = (b.transpose() * &ainv * &b)[(0, 0)];
            if norm2 >= 1.0 - 1e-9 {
                return Err(Error::Invalid(format!(
                    "Randers covector inadmissible: |b|_a^2 = {norm2:.6} >= 1 at x = {x:?}"
                )));
            }
            // advance odometer
            let mut k = 0;
            loop {
                if k == self.n {
                    return Ok(());
                }
                grid_point[k] += 1;
                if grid_point[k] < steps {
                    break;
                }
                grid_point[k] = 0;
                k += 1;
            }
        }
    }

    /// Evaluate F^2 over any scalar algebra; `xu` holds the 2n chart
    /// coordinates (x first), `proto` fixes the algebra for constants.
    pub fn eval_f2<S: Scalar>(&self, xu: &[S], proto: &S) -> Result<S> {
        let n = self.n;
        if xu.len() != 2 * n {
            return Err(Error::Invalid(format!(
                "expected {} coordinates, got {}",
                2 * n,
                xu.len()
            )));
        }
        let (x, u) = xu.split_at(n);
        match &self.family {
            Family::Riemannian { metric } => quadratic_form(metric, x, u, proto),
            Family::Randers { metric, covector } => {
                let q = quadratic_form(metric, x, u, proto)?;
                let mut bu = proto.lift(0.0);
                for i in 0..n {
                    bu = bu + covector[i].eval(x, proto)? * u[i].clone();
                }
                let f = q.sqrt()? + bu;
                if f.value() <= 0.0 {
                    return Err(Error::Domain(format!(
                        "Randers norm non-positive ({}) at evaluation point",
                        f.value()
                    )));
                }
                Ok(f.clone() * f)
            }
            Family::Custom { f2 } => f2.eval(xu, proto),
        }
    }

    /// Jet of F^2 at a bundle point, in the 2n chart coordinates.
    pub fn f2_jet(&self, p: &BundlePoint, order: usize) -> Result<Jet> {
        check_point(self, p)?;
        taylor_jet(|vars| self.eval_f2(vars, &vars[0]), &p.coords(), order)
    }
}

fn quadratic_form<S: Scalar>(metric: &[Vec<Expr>], x: &[S], u: &[S], proto: &S) -> Result<S> {
    let n = x.len();
    let mut acc = proto.lift(0.0);
    for i in 0..n {
        for j in 0..n {
            acc = acc + metric[i][j].eval(x, proto)? * u[i].clone() * u[j].clone();
        }
    }
    Ok(acc)
}

fn check_matrix_shape(m: &[Vec<Expr>], n: usize) -> Result<()> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::Invalid(format!("metric matrix is not {n}x{n}")));
    }
    Ok(())
}

fn check_point(model: &FinslerModel, p: &BundlePoint) -> Result<()> {
    if p.dim() != model.n {
        return Err(Error::Invalid(format!(
            "point dim {} != model dim {}",
            p.dim(),
            model.n
        )));
    }
    Ok(())
}

/// The energy r^2 = F^2(x, u).
pub fn energy(model: &FinslerModel, p: &BundlePoint) -> Result<f64> {
    check_point(model, p)?;
    let coords = p.coords();
    let v = model.eval_f2(&coords, &0.0)?;
    if v <= 0.0 {
        return Err(Error::Domain(format!("F^2 = {v} is not positive")));
    }
    Ok(v)
}

/// Cholesky factorization with an explicit pivot threshold; errors identify
/// the first failing pivot.
pub fn cholesky_positive_definite(g: &DMatrix<f64>, pivot_threshold: f64) -> Result<()> {
    let n = g.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= pivot_threshold {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Ok(())
}

/// Fundamental tensor g_ij = 1/2 d^2 F^2 / du^i du^j at a point.
pub fn fundamental_tensor(model: &FinslerModel, p: &BundlePoint) -> Result<MetricValue> {
    let jet = model.f2_jet(p, 2)?;
    metric_from_jet(model.dim(), &jet)
}

pub(crate) fn metric_from_jet(n: usize, f2: &Jet) -> Result<MetricValue> {
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * f2.partial(&[n + i, n + j]));
    cholesky_positive_definite(&g, 1e-10)?;
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMetric("fundamental tensor not invertible".into()))?;
    Ok(MetricValue { g, ginv, r2: f2.value() })
}

/// Cartan tensor C_ijk = 1/4 d^3 F^2 / du^i du^j du^k (totally symmetric).
pub fn cartan_tensor(model: &FinslerModel, p: &BundlePoint) -> Result<Tensor3> {
    let n = model.dim();
    let jet = model.f2_jet(p, 3)?;
    Ok(Tensor3::from_fn(n, |i, j, k| 0.25 * jet.partial(&[n + i, n + j, n + k])))
}

/// Contraction Cbar^k_ij = g^{kl} C_lij against the inverse metric.
pub fn contracted_cartan(model: &FinslerModel, p: &BundlePoint) -> Result<Tensor3> {
    let metric = fundamental_tensor(model, p)?;
    let c = cartan_tensor(model, p)?;
    Ok(raise_first_index(&c, &metric.ginv))
}

pub(crate) fn raise_first_index(c: &Tensor3, ginv: &DMatrix<f64>) -> Tensor3 {
    let n = c.dim();
    Tensor3::from_fn(n, |k, i, j| (0..n).map(|l| ginv[(k, l)] * c[(l, i, j)]).sum())
}
