use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Shared layout for truncated multivariate Taylor expansions: the list of
/// exponent vectors with total degree <= order (graded lexicographic, constant
/// term first), an index map, a multiplication table and per-variable
/// differentiation tables.
#[derive(Debug)]
pub struct JetSpace {
    dim: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degs: Vec<u8>,
    index: HashMap<Vec<u8>, u32>,
    mul_table: Vec<(u32, u32, u32)>,
    diff_table: Vec<Vec<(u32, u32, f64)>>,
}

fn enumerate_exponents(dim: usize, order: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; dim];
    for total in 0..=order {
        fill(&mut out, &mut cur, 0, total as u8);
    }
    return out;

    fn fill(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, left: u8) {
        if var + 1 == cur.len() {
            cur[var] = left;
            out.push(cur.clone());
            cur[var] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[var] = e;
            fill(out, cur, var + 1, left - e);
            cur[var] = 0;
        }
    }
}

impl JetSpace {
    fn build(dim: usize, order: usize) -> JetSpace {
        assert!(dim >= 1, "jet space needs at least one variable");
        let exps = if dim == 0 { vec![vec![]] } else { enumerate_exponents(dim, order) };
        let degs: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let index: HashMap<Vec<u8>, u32> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();

        let mut mul_table = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                if (degs[i] + degs[j]) as usize > order {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                mul_table.push((i as u32, j as u32, index[&sum]));
            }
        }

        let mut diff_table = vec![Vec::new(); dim];
        for (s, e) in exps.iter().enumerate() {
            for v in 0..dim {
                if e[v] == 0 {
                    continue;
                }
                let mut lower = e.clone();
                lower[v] -= 1;
                diff_table[v].push((s as u32, index[&lower], e[v] as f64));
            }
        }

        JetSpace { dim, order, exps, degs, index, mul_table, diff_table }
    }

    /// Fetch (or lazily construct) the cached space for `dim` variables
    /// truncated at total degree `order`.
    pub fn get(dim: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((dim, order))
            .or_insert_with(|| Arc::new(JetSpace::build(dim, order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    fn slot(&self, exp: &[u8]) -> Option<usize> {
        self.index.get(exp).map(|&i| i as usize)
    }
}

/// Truncated Taylor expansion of a scalar quantity around a point.
///
/// `coeffs[s]` is the Taylor-normalized coefficient for the exponent vector in
/// slot `s`; the raw partial derivative is recovered by multiplying with the
/// factorials of the exponents. `valid` is the largest total degree whose
/// coefficients are meaningful: differentiating a jet lowers it by one, all
/// other operations propagate the minimum of their operands.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    valid: usize,
    coeffs: Vec<f64>,
}

fn factorial(k: u8) -> f64 {
    (1..=k as u64).product::<u64>() as f64
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = v;
        Jet { space: space.clone(), valid: space.order, coeffs }
    }

    /// The coordinate function of variable `var`, expanded at `base`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, base: f64) -> Jet {
        assert!(var < space.dim, "variable index out of range");
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = base;
        if space.order >= 1 {
            let mut e = vec![0u8; space.dim];
            e[var] = 1;
            coeffs[space.slot(&e).expect("order >= 1 has linear slots")] = 1.0;
        }
        Jet { space: space.clone(), valid: space.order, coeffs }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    /// Largest total derivative order this jet still carries.
    pub fn order(&self) -> usize {
        self.valid
    }

    /// Value of the underlying function at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw partial derivative for a multi-index given as a sorted axis list,
    /// e.g. `&[0, 0, 1]` for d^3/dx0 dx0 dx1.
    pub fn partial(&self, axes: &[usize]) -> f64 {
        let mut exp = vec![0u8; self.space.dim];
        for &a in axes {
            assert!(a < self.space.dim, "axis out of range");
            exp[a] += 1;
        }
        self.partial_exp(&exp)
    }

    /// Raw partial derivative for an exponent vector.
    pub fn partial_exp(&self, exp: &[u8]) -> f64 {
        let total: u8 = exp.iter().sum();
        assert!(
            (total as usize) <= self.valid,
            "requested order {} exceeds jet validity {}",
            total,
            self.valid
        );
        let slot = self.space.slot(exp).expect("exponent outside jet space");
        let norm: f64 = exp.iter().map(|&e| factorial(e)).product();
        self.coeffs[slot] * norm
    }

    /// Taylor-normalized coefficient (partial divided by multi-index factorial).
    pub fn taylor_coefficient(&self, exp: &[u8]) -> f64 {
        let slot = self.space.slot(exp).expect("exponent outside jet space");
        self.coeffs[slot]
    }

    /// All (sorted-axis multi-index, raw partial) pairs up to the valid order.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        for (s, exp) in self.space.exps.iter().enumerate() {
            if (self.space.degs[s] as usize) > self.valid {
                continue;
            }
            let mut axes = Vec::new();
            for (v, &e) in exp.iter().enumerate() {
                for _ in 0..e {
                    axes.push(v);
                }
            }
            let norm: f64 = exp.iter().map(|&e| factorial(e)).product();
            out.push((axes, self.coeffs[s] * norm));
        }
        out
    }

    fn same_space(&self, other: &Jet) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jet arithmetic requires operands from the same space"
        );
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Jet { space: self.space.clone(), valid: self.valid.min(other.valid), coeffs }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Jet { space: self.space.clone(), valid: self.valid.min(other.valid), coeffs }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            valid: self.valid,
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            valid: self.valid,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let valid = self.valid.min(other.valid);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.mul_table {
            if (self.space.degs[k as usize] as usize) > valid {
                continue;
            }
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet { space: self.space.clone(), valid, coeffs }
    }

    /// Partial derivative with respect to variable `var`, as a jet one order
    /// shorter.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(var < self.space.dim, "variable index out of range");
        assert!(self.valid >= 1, "cannot differentiate an order-0 jet");
        let valid = self.valid - 1;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(src, dst, fac) in &self.space.diff_table[var] {
            if (self.space.degs[dst as usize] as usize) > valid {
                continue;
            }
            coeffs[dst as usize] = self.coeffs[src as usize] * fac;
        }
        Jet { space: self.space.clone(), valid, coeffs }
    }

    /// Composition with a univariate function given by its raw derivatives at
    /// the jet's point value: `derivs[j] = h^(j)(value)`.
    fn compose(&self, derivs: &[f64]) -> Jet {
        let k = self.valid;
        debug_assert!(derivs.len() > k);
        let w = self.add_scalar(-self.coeffs[0]);
        let mut acc = Jet::constant(&self.space, derivs[k] / factorial(k as u8));
        acc.valid = k;
        for j in (0..k).rev() {
            acc = acc.mul(&w).add_scalar(derivs[j] / factorial(j as u8));
        }
        acc.valid = k;
        acc
    }

    fn finite_value(&self, what: &str) -> Result<f64> {
        let v = self.coeffs[0];
        if !v.is_finite() {
            return Err(Error::Domain(format!("{what}: non-finite value {v}")));
        }
        Ok(v)
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.finite_value("recip")?;
        if a == 0.0 {
            return Err(Error::Domain("recip: division by zero".into()));
        }
        let mut d = vec![0.0; self.valid + 1];
        let mut cur = 1.0 / a;
        for (j, slot) in d.iter_mut().enumerate() {
            *slot = cur;
            cur *= -((j + 1) as f64) / a;
        }
        Ok(self.compose(&d))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.finite_value("sqrt")?;
        if a <= 0.0 {
            return Err(Error::Domain(format!("sqrt of non-positive value {a}")));
        }
        self.powf_unchecked(0.5, a)
    }

    pub fn powf(&self, e: f64) -> Result<Jet> {
        let a = self.finite_value("powf")?;
        if a <= 0.0 {
            return Err(Error::Domain(format!("powf base {a} outside (0, inf)")));
        }
        self.powf_unchecked(e, a)
    }

    fn powf_unchecked(&self, e: f64, a: f64) -> Result<Jet> {
        let mut d = vec![0.0; self.valid + 1];
        let mut coef = 1.0;
        for (j, slot) in d.iter_mut().enumerate() {
            *slot = coef * a.powf(e - j as f64);
            coef *= e - j as f64;
        }
        Ok(self.compose(&d))
    }

    pub fn powi(&self, k: i32) -> Result<Jet> {
        if k < 0 {
            return self.powi(-k)?.recip();
        }
        let mut acc = Jet::constant(&self.space, 1.0);
        acc.valid = self.valid;
        for _ in 0..k {
            acc = acc.mul(self);
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Jet {
        let e = self.coeffs[0].exp();
        let d = vec![e; self.valid + 1];
        self.compose(&d)
    }

    pub fn ln(&self) -> Result<Jet> {
        let a = self.finite_value("ln")?;
        if a <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value {a}")));
        }
        let mut d = vec![0.0; self.valid + 1];
        d[0] = a.ln();
        let mut cur = 1.0 / a;
        for j in 1..=self.valid {
            d[j] = cur;
            cur *= -(j as f64) / a;
        }
        Ok(self.compose(&d))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.valid).map(|j| cycle[j % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.valid).map(|j| cycle[j % 4]).collect();
        self.compose(&d)
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet::add(&self, &rhs)
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet::sub(&self, &rhs)
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul(&self, &rhs)
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::neg(&self)
    }
}

impl<'a> std::ops::Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::add(self, rhs)
    }
}

impl<'a> std::ops::Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::sub(self, rhs)
    }
}

impl<'a> std::ops::Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}
