use super::tape::{ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// Below this magnitude a gradient entry is compared in absolute terms:
/// the denominator of the relative error never drops under it.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares backward-pass gradients against central differences
/// `(f(p + eps) - f(p - eps)) / 2 eps`, one parameter entry at a time.
///
/// `build` must record a scalar loss on the given tape, reading parameter
/// values from the given set. It is called `1 + 2 * entries` times.
pub fn grad_check<F>(
    mut build: F,
    params: &mut ParamSet,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<Var>,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut tape = Tape::new();
    let loss = build(&mut tape, params)?;
    tape.backward(loss, params)?;
    let analytic: Vec<_> = params.iter().map(|p| p.grad.clone()).collect();

    let mut eval = |params: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, params)?;
        Ok(tape.value(loss)[(0, 0)])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
        entries: 0,
        tolerance,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for k in 0..params.get(id).value.len() {
            let original = params.get(id).value.as_slice()[k];
            params.get_mut(id).value.as_mut_slice()[k] = original + epsilon;
            let plus = eval(params)?;
            params.get_mut(id).value.as_mut_slice()[k] = original - epsilon;
            let minus = eval(params)?;
            params.get_mut(id).value.as_mut_slice()[k] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[id.0].as_slice()[k];
            let rel = relative_error(a, numeric);
            report.entries += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((params.get(id).name.clone(), k));
            }
        }
    }
    Ok(report)
}
