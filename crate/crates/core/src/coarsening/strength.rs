use super::VariableFit;

/// Directed graph of strong couplings `i → j` with the importance of every
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthGraph {
    /// Surviving `(j, |p_ij|)` of each row, ascending in `j`.
    pub edges: Vec<Vec<(usize, f64)>>,
    /// `σ_j`: total strength row fits place on `j`.
    pub sigma: Vec<f64>,
}

impl StrengthGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Importance recomputed from the stored edges, accumulated row by row.
    pub fn recompute_sigma(&self) -> Vec<f64> {
        let mut sigma = vec![0.0; self.edges.len()];
        for row in &self.edges {
            for &(j, w) in row {
                sigma[j] += w;
            }
        }
        sigma
    }

    /// For every `j`, the rows with a surviving edge into `j`.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut inn = vec![Vec::new(); self.edges.len()];
        for (i, row) in self.edges.iter().enumerate() {
            for &(j, _) in row {
                inn[j].push(i);
            }
        }
        inn
    }
}

/// Relative thresholding of the penalized weights of each fit followed by
/// importance accumulation. Entries with `|p_ij| < θ · max_j |p_ij|` are
/// dropped, as are self-loops.
pub fn strength_graph(fits: &[VariableFit], theta: f64) -> StrengthGraph {
    let edges: Vec<Vec<(usize, f64)>> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| match f {
            VariableFit::Fitted(fit) => {
                let rowmax = fit.p_penalized.iter().fold(0.0f64, |m, p| m.max(p.abs()));
                fit.selected
                    .iter()
                    .zip(&fit.p_penalized)
                    .filter(|&(&j, &p)| j != i && p != 0.0 && p.abs() >= theta * rowmax)
                    .map(|(&j, &p)| (j, p.abs()))
                    .collect()
            }
            _ => Vec::new(),
        })
        .collect();
    let mut g = StrengthGraph {
        sigma: Vec::new(),
        edges,
    };
    g.sigma = g.recompute_sigma();
    g
}

/// Greedy independent set ordered by importance.
///
/// Repeatedly takes the unprocessed variable of largest `σ` (lowest index on
/// ties) into the coarse set and discards every unprocessed variable with a
/// strong edge into it. Returns the coarse membership mask.
pub fn independent_set(g: &StrengthGraph, n: usize) -> Vec<bool> {
    assert_eq!(g.len(), n, "strength graph size");
    let mut order: Vec<usize> = (0..n).collect();
    // σ never changes during the loop, so the argmax sequence is this order
    order.sort_by(|&a, &b| g.sigma[b].total_cmp(&g.sigma[a]).then(a.cmp(&b)));
    let inn = g.in_neighbors();
    let mut candidate = vec![true; n];
    let mut coarse = vec![false; n];
    for &istar in &order {
        if !candidate[istar] {
            continue;
        }
        coarse[istar] = true;
        candidate[istar] = false;
        for &i in &inn[istar] {
            candidate[i] = false;
        }
    }
    coarse
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lars::LocalFit;

    fn fit(center: usize, sel: &[usize], p: &[f64]) -> VariableFit {
        VariableFit::Fitted(LocalFit {
            center,
            selected: sel.to_vec(),
            p_penalized: p.to_vec(),
            p_unpenalized: p.to_vec(),
            step: 0,
        })
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let fits = vec![
            fit(0, &[1, 2], &[1.0, 1e-9]),
            fit(1, &[0], &[0.5]),
            VariableFit::Coarse,
        ];
        let g = strength_graph(&fits, 0.0);
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn threshold_arithmetic() {
        let fits = vec![
            fit(0, &[1, 2], &[1.0, 0.005]),
            VariableFit::Isolated,
            VariableFit::Isolated,
        ];
        let g = strength_graph(&fits, 0.01);
        assert_eq!(g.edges[0], vec![(1, 1.0)]);
        assert_eq!(g.sigma, vec![0.0, 1.0, 0.0]);
        assert_eq!(g.recompute_sigma(), g.sigma);
    }

    #[test]
    fn path_trace() {
        // 0 and 2 interpolate from 1; 1 from both ends
        let fits = vec![
            fit(0, &[1], &[1.0]),
            fit(1, &[0, 2], &[1.0, 1.0]),
            fit(2, &[1], &[1.0]),
        ];
        let g = strength_graph(&fits, 0.01);
        assert_eq!(g.sigma, vec![1.0, 2.0, 1.0]);
        assert_eq!(independent_set(&g, 3), vec![false, true, false]);
    }

    #[test]
    fn empty_graph_is_all_coarse() {
        let fits = vec![VariableFit::Isolated; 4];
        let g = strength_graph(&fits, 0.01);
        assert_eq!(independent_set(&g, 4), vec![true; 4]);
    }
}
