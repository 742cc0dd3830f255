//! Central-difference verification of analytic gradients.

use std::collections::HashSet;

use super::param::ParamArray;
use crate::rng::RngStream;

/// One evaluation of the objective.
///
/// `pattern` records the on/off state of every piecewise-linear unit (ReLU
/// masks); a coordinate whose `w +- h` evaluations change the pattern straddles
/// a kink where the central difference is meaningless, so it is skipped.
/// Smooth objectives leave it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub pattern: Vec<bool>,
}

impl Probe {
    pub fn smooth(loss: f64) -> Self {
        Self { loss, pattern: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Minimum number of coordinates compared (all, if fewer exist).
    pub min_coords: usize,
    /// Coordinates drawn from every array before the global sample.
    pub per_array: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-4, min_coords: 1000, per_array: 32, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    /// `(array name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares `analytic[i][j]` with `(f(w + h) - f(w - h)) / 2h` on a random
/// subsample of coordinates and returns the largest relative error
/// `|a - n| / max(|a|, |n|, 1e-8)`. Parameters are restored afterwards.
pub fn grad_check<F>(
    params: &mut [ParamArray],
    analytic: &[Vec<f64>],
    mut probe: F,
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&[ParamArray]) -> Probe,
{
    let mut rng = RngStream::new(opts.seed);
    let total: usize = params.iter().map(ParamArray::len).sum();

    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    for (a, p) in params.iter().enumerate() {
        let mut idx: Vec<usize> = (0..p.len()).collect();
        rng.shuffle(&mut idx);
        for j in idx.into_iter().take(opts.per_array) {
            seen.insert((a, j));
            candidates.push((a, j));
        }
    }
    let quota = candidates.len();
    let mut rest: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(a, p)| (0..p.len()).map(move |j| (a, j)))
        .filter(|c| !seen.contains(c))
        .collect();
    rng.shuffle(&mut rest);
    candidates.extend(rest);

    let base = probe(params);
    let target = opts.min_coords.min(total);
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped_kinks: 0, worst: None };
    for (k, &(a, j)) in candidates.iter().enumerate() {
        if k >= quota && report.checked >= target {
            break;
        }
        let orig = params[a].values[j];
        params[a].values[j] = orig + opts.h;
        let plus = probe(params);
        params[a].values[j] = orig - opts.h;
        let minus = probe(params);
        params[a].values[j] = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * opts.h);
        let err = rel_error(analytic[a][j], numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((params[a].name.clone(), j));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ParamKind;

    #[test]
    fn quadratic_gradient_passes_and_corruption_fails() {
        // f(w) = sum c_i w_i^2, df/dw_i = 2 c_i w_i
        let c: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 * 0.1).collect();
        let mut params = vec![ParamArray::from_values(
            "w",
            vec![50],
            ParamKind::Weight,
            (0..50).map(|i| (i as f64 - 25.0) * 0.07).collect(),
        )];
        let c2 = c.clone();
        let f = move |ps: &[ParamArray]| Probe::smooth(ps[0].values.iter().zip(&c2).map(|(w, c)| c * w * w).sum());
        let grad: Vec<f64> = params[0].values.iter().zip(&c).map(|(w, c)| 2.0 * c * w).collect();
        let opts = GradCheckOptions::default();
        let ok = grad_check(&mut params, &[grad.clone()], &f, &opts);
        assert_eq!(ok.checked, 50);
        assert!(ok.max_rel_error < 1e-8, "{ok:?}");

        let mut bad = grad.clone();
        bad[7] += 0.5;
        let report = grad_check(&mut params, &[bad], &f, &opts);
        assert!(report.max_rel_error > 1e-2);
        assert_eq!(report.worst, Some(("w".to_string(), 7)));
    }
}
