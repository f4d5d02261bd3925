//! Central finite-difference check of the analytic gradients.

use serde::{Deserialize, Serialize};

use crate::model::{BRepNetModel, ModelError, ModelInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Pass threshold on the relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so entries whose
    /// gradient is essentially zero are compared absolutely.
    pub floor: f64,
    /// Test hook: scales the analytic gradient of the first block by 1.1.
    pub corrupt_backward: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { step: 1e-6, tolerance: 1e-5, floor: 1e-4, corrupt_backward: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub name: String,
    pub size: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Entry with the largest relative error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub options: GradcheckOptions,
    pub loss: f64,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
    pub blocks: Vec<BlockReport>,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares every analytic gradient entry with
/// `(L(θ + h) - L(θ - h)) / 2h` for the mean face cross-entropy.
pub fn gradcheck(
    model: &BRepNetModel<f64>,
    input: ModelInput<'_, f64>,
    labels: &[usize],
    options: GradcheckOptions,
) -> Result<GradcheckReport, ModelError> {
    let (loss, grads) = model.loss_and_grads(input, labels)?;
    let analytic: Vec<Vec<f64>> = grads.blocks().into_iter().map(<[f64]>::to_vec).collect();
    let names = model.param_block_names();
    let mut probe = model.clone();
    let h = options.step;
    let mut blocks = Vec::with_capacity(analytic.len());
    for (b, grad) in analytic.iter().enumerate() {
        let mut report = BlockReport {
            name: names[b].clone(),
            size: grad.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (i, &g) in grad.iter().enumerate() {
            let g = if options.corrupt_backward && b == 0 { g * 1.1 } else { g };
            let original = probe.param_blocks()[b][i];
            probe.param_blocks_mut()[b][i] = original + h;
            let plus = probe.loss(input, labels)?;
            probe.param_blocks_mut()[b][i] = original - h;
            let minus = probe.loss(input, labels)?;
            probe.param_blocks_mut()[b][i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = relative_error(g, numeric, options.floor);
            report.max_abs_error = report.max_abs_error.max((g - numeric).abs());
            if rel > report.max_rel_error || i == 0 {
                report.max_rel_error = rel;
                report.worst_index = i;
                report.analytic = g;
                report.numeric = numeric;
            }
        }
        blocks.push(report);
    }
    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    let max_abs_error = blocks.iter().map(|b| b.max_abs_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        options,
        loss,
        num_params: model.num_params(),
        max_rel_error,
        max_abs_error,
        passed: max_rel_error < options.tolerance,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_uses_the_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-4), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-4) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0, 1e-4) - 1e-5).abs() < 1e-18);
        assert_eq!(relative_error(0.0, 0.0, 0.0), 0.0);
    }
}
