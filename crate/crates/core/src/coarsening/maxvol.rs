use super::{CoarseningState, VariableFit};
use crate::error::Result;

/// Outcome of a maximal volume pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MaxvolReport {
    pub swaps: usize,
    /// The swap budget ran out while some `|p_ij|` still exceeded 1.
    pub budget_exhausted: bool,
}

/// Largest `|p_kℓ|` over the fine rows; ties go to the lowest `(k, ℓ)`.
pub(crate) fn largest_weight(state: &CoarseningState) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (k, f) in state.fits.iter().enumerate() {
        if state.is_coarse[k] {
            continue;
        }
        if let VariableFit::Fitted(fit) = f {
            for (&l, &p) in fit.selected.iter().zip(&fit.p_unpenalized) {
                if best.is_none_or(|(_, _, b)| p.abs() > b) {
                    best = Some((k, l, p.abs()));
                }
            }
        }
    }
    best
}

/// Swaps coarse and fine variables until no interpolation weight exceeds 1
/// in magnitude, refitting the rows a swap invalidates.
pub(crate) fn maxvol_pass(state: &mut CoarseningState, budget: usize) -> Result<MaxvolReport> {
    let mut report = MaxvolReport::default();
    while let Some((k, l, p)) = largest_weight(state) {
        if p <= 1.0 {
            break;
        }
        if report.swaps == budget {
            report.budget_exhausted = true;
            break;
        }
        state.is_coarse[k] = true;
        state.fits[k] = VariableFit::Coarse;
        state.is_coarse[l] = false;
        let mut affected: Vec<usize> = state
            .fits
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, VariableFit::Fitted(fit) if fit.selected.contains(&l)))
            .map(|(i, _)| i)
            .collect();
        affected.push(l);
        affected.sort_unstable();
        state.refit(&affected)?;
        report.swaps += 1;
    }
    Ok(report)
}
