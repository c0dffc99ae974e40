//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates to compare; all of them when the model is smaller. Values
    /// below 200 are raised to 200.
    pub coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            coordinates: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max of `|a − n| / max(|a|, |n|, 1e-8)` over compared coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates dropped because the one-sided slopes disagree, i.e. the
    /// perturbation straddles a non-differentiable point such as ReLU at 0.
    pub skipped_kinks: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the gradients currently held in `store` (trainable entries only)
/// with central differences of `loss`. `loss` must be deterministic.
pub fn grad_check<F>(store: &mut ParamStore, mut loss: F, opts: GradCheckOptions) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let coords: Vec<(usize, usize)> = store
        .iter()
        .enumerate()
        .filter(|(_, p)| p.trainable)
        .flat_map(|(i, p)| (0..p.value.len()).map(move |j| (i, j)))
        .collect();
    let budget = opts.coordinates.max(200);
    let chosen: Vec<(usize, usize)> = if coords.len() <= budget {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = sample(&mut rng, coords.len(), budget).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| coords[k]).collect()
    };

    let h = opts.step;
    let f0 = loss(store);
    let ids: Vec<_> = store.ids().collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        worst: None,
        worst_values: None,
    };
    for (pi, j) in chosen {
        let id = ids[pi];
        let orig = store.value(id).data()[j];
        store.value_mut(id).data_mut()[j] = orig + h;
        let fp = loss(store);
        store.value_mut(id).data_mut()[j] = orig - h;
        let fm = loss(store);
        store.value_mut(id).data_mut()[j] = orig;

        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        if (fwd - bwd).abs() > 1e-2 * fwd.abs().max(bwd.abs()).max(1.0) {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = store.get(id).grad.data()[j];
        let err = relative_error(analytic, numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((store.get(id).name.clone(), j));
            report.worst_values = Some((analytic, numeric));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn square_function() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::vector(vec![3.0]), true).unwrap();
        store.get_mut(id).grad = Tensor::vector(vec![6.0]);
        let report = grad_check(&mut store, |s| s.value(id).data()[0].powi(2), GradCheckOptions::default());
        assert_eq!(report.checked, 1);
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn relu_kink_is_skipped() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![0.0, 2.0]), true).unwrap();
        // analytic subgradient 0 at the kink, 1 elsewhere
        store.get_mut(id).grad = Tensor::vector(vec![0.0, 1.0]);
        let report = grad_check(
            &mut store,
            |s| s.value(id).data().iter().map(|v| v.max(0.0)).sum(),
            GradCheckOptions::default(),
        );
        assert_eq!(report.skipped_kinks, 1);
        assert_eq!(report.checked, 1);
        assert!(report.max_rel_error < 1e-9);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::vector(vec![1.0]), true).unwrap();
        store.get_mut(id).grad = Tensor::vector(vec![1.0]);
        let report = grad_check(&mut store, |s| s.value(id).data()[0].powi(3), GradCheckOptions::default());
        assert!(report.max_rel_error > 0.5);
    }
}
