use crate::error::{Error, Result};

/// Step selection for [`partial_fd`].
///
/// `Auto` scales the base step with both the coordinate magnitude and the
/// derivative order: 1e-3 for orders 1-2, 1e-2 for order 3 and 2.5e-2 for
/// order 4. The larger bases at high order keep the roundoff amplification
/// eps/h^m below the truncation error of the Richardson-extrapolated stencil.
#[derive(Debug, Clone, Copy, Default)]
pub enum StepPolicy {
    #[default]
    Auto,
    Fixed(f64),
}

impl StepPolicy {
    fn base(&self, order: usize) -> f64 {
        match self {
            StepPolicy::Fixed(h) => *h,
            StepPolicy::Auto => match order {
                0..=2 => 1e-3,
                3 => 1e-2,
                _ => 2.5e-2,
            },
        }
    }
}

/// Central-difference estimate of a mixed partial derivative with one level of
/// Richardson extrapolation; the remaining truncation error is O(h^4).
///
/// `idx` lists the differentiation axes with multiplicity (`&[0, 0, 1]` for
/// d^3/dx0 dx0 dx1) and may hold at most four entries. Any stencil point on
/// which `f` fails (for instance because the stencil crossed the zero section
/// of a slit-domain field) propagates as a domain error.
pub fn partial_fd<F>(f: &F, p: &[f64], idx: &[usize], policy: StepPolicy) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if idx.len() > 4 {
        return Err(Error::Invalid(format!(
            "partial_fd supports derivative order <= 4, got {}",
            idx.len()
        )));
    }
    for &a in idx {
        if a >= p.len() {
            return Err(Error::Invalid(format!("axis {a} out of range for dim {}", p.len())));
        }
    }
    if idx.is_empty() {
        return f(p);
    }

    let base = policy.base(idx.len());
    let steps: Vec<f64> = idx.iter().map(|&a| base * p[a].abs().max(1.0)).collect();

    let coarse = stencil(f, p, idx, &steps, 1.0)?;
    let fine = stencil(f, p, idx, &steps, 0.5)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn stencil<F>(f: &F, p: &[f64], idx: &[usize], steps: &[f64], scale: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let m = idx.len();
    let mut acc = 0.0;
    for mask in 0..(1u32 << m) {
        let mut q = p.to_vec();
        let mut sign = 1.0;
        for (j, &ax) in idx.iter().enumerate() {
            if mask >> j & 1 == 0 {
                q[ax] += steps[j] * scale;
            } else {
                q[ax] -= steps[j] * scale;
                sign = -sign;
            }
        }
        acc += sign * f(&q)?;
    }
    let denom: f64 = steps.iter().map(|h| 2.0 * h * scale).product();
    Ok(acc / denom)
}
