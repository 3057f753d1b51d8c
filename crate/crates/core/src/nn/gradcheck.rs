//! Central finite-difference check of analytic parameter gradients.

use super::tensor::Module;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tol: f64,
    /// Denominator floor of the relative error, so that two vanishing
    /// gradients compare by absolute difference.
    pub floor: f64,
    /// Check at most this many elements per tensor (evenly strided).
    pub max_per_tensor: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-4, tol: 1e-3, floor: 1e-8, max_per_tensor: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name, element index, analytic and numeric value at the worst element.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

/// `|a - n| / max(|a|, |n|, floor)`; zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradients produced by `backprop` (which must zero and then
/// accumulate gradients, returning the loss) with central differences of
/// `loss`, element by element over every parameter of `model`.
pub fn grad_check<S, M>(
    model: &mut M,
    mut backprop: impl FnMut(&mut M) -> f64,
    mut loss: impl FnMut(&M) -> f64,
    cfg: GradCheckConfig,
) -> GradCheckReport
where
    S: Scalar,
    M: Module<S>,
{
    model.zero_grad();
    backprop(model);
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    model.visit("", &mut |name, t| {
        let g = t.grad().map(|g| g.iter().map(|v| v.f64()).collect()).unwrap_or_else(|| vec![0.0; t.numel()]);
        analytic.push((name.to_string(), g));
    });

    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, checked: 0, tol: cfg.tol };
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        let n = grads.len();
        let stride = match cfg.max_per_tensor {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for idx in (0..n).step_by(stride) {
            let orig = read(model, ti, idx);
            write(model, ti, idx, S::of(orig.f64() + cfg.eps));
            let plus_at = read(model, ti, idx).f64();
            let lp = loss(model);
            write(model, ti, idx, S::of(orig.f64() - cfg.eps));
            let minus_at = read(model, ti, idx).f64();
            let lm = loss(model);
            write(model, ti, idx, orig);
            // divide by the step actually taken after rounding to S
            let numeric = (lp - lm) / (plus_at - minus_at);
            let err = relative_error(grads[idx], numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((name.clone(), idx, grads[idx], numeric));
            }
        }
    }
    report
}

fn read<S: Scalar, M: Module<S>>(model: &M, tensor: usize, idx: usize) -> S {
    let mut i = 0;
    let mut out = S::zero();
    model.visit("", &mut |_, t| {
        if i == tensor {
            out = t.data()[idx];
        }
        i += 1;
    });
    out
}

fn write<S: Scalar, M: Module<S>>(model: &mut M, tensor: usize, idx: usize, v: S) {
    let mut i = 0;
    model.visit_mut("", &mut |_, t| {
        if i == tensor {
            t.data_mut()[idx] = v;
        }
        i += 1;
    });
}
