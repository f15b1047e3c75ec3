//! Exhaustive hyperparameter search over a declared grid, scored by
//! accuracy on a held-out inner validation set.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::harness::config::ModelSpec;
use crate::harness::HarnessError;
use crate::models::Classifier;
use crate::seeds;

/// The winning combination: the concrete spec, the assignments that
/// produced it (axis declaration order), and its inner accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: ModelSpec,
    pub assignments: Vec<(String, f64)>,
    pub accuracy: f64,
}

/// Splits a training set into an inner (train, validation) pair by
/// seeded shuffle — the held-out fraction never reaches the outer
/// validation data. `fraction` is the inner-train share.
pub fn inner_split(
    data: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), HarnessError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::Config(format!(
            "inner split fraction must be strictly inside (0, 1), got {fraction}"
        )));
    }
    let mut indices: Vec<usize> = (0..data.len()).collect();
    use rand::seq::SliceRandom;
    indices.shuffle(&mut seeds::rng(seed, &[seeds::tag::GRID, seeds::tag::SPLIT]));
    let cut = (fraction * indices.len() as f64).ceil() as usize;
    if cut == 0 || cut == indices.len() {
        return Err(HarnessError::Config(format!(
            "inner split of {} samples at fraction {fraction} leaves an empty side",
            data.len()
        )));
    }
    let pick = |slice: &[usize]| -> Result<Dataset, HarnessError> {
        let samples = slice
            .iter()
            .map(|&i| data.samples()[i].clone())
            .collect::<Vec<_>>();
        Ok(Dataset::from_parts(
            samples,
            data.num_features(),
            data.num_classes(),
        )?)
    };
    Ok((pick(&indices[..cut])?, pick(&indices[cut..])?))
}

/// Lists every combination of the grid in a fixed order: the first
/// declared axis varies slowest, the last fastest.
fn enumerate_combinations(grid: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let total: usize = grid.iter().map(|(_, values)| values.len()).product();
    (0..total)
        .map(|index| {
            // Mixed-radix decoding, first axis slowest.
            let mut remainder = index;
            let mut stride = total;
            grid.iter()
                .map(|(name, values)| {
                    stride /= values.len();
                    let digit = remainder / stride;
                    remainder %= stride;
                    (name.clone(), values[digit])
                })
                .collect()
        })
        .collect()
}

/// Exhaustively evaluates the Cartesian product of `grid` over `base`,
/// fitting each combination on `train` and scoring accuracy on
/// `val_inner` (which the caller keeps disjoint from `train`).
///
/// Combinations enumerate with the first declared axis slowest; only a
/// strictly higher accuracy displaces the incumbent, so ties resolve to
/// the earliest combination in declaration order. Every combination
/// shares one derived fit seed, keeping the comparison paired and the
/// selection deterministic. Combinations that fail to fit are skipped;
/// if all fail, the error from the first is returned.
pub fn grid_search(
    train: &Dataset,
    val_inner: &Dataset,
    base: &ModelSpec,
    grid: &[(String, Vec<f64>)],
    seed: u64,
) -> Result<GridOutcome, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Config("hyperparameter grid is empty".to_string()));
    }
    for (name, values) in grid {
        if values.is_empty() {
            return Err(HarnessError::Config(format!("grid axis {name} has no values")));
        }
    }
    if train.is_empty() || val_inner.is_empty() {
        return Err(HarnessError::Config(
            "grid search needs nonempty train and inner validation sets".to_string(),
        ));
    }

    let combos = enumerate_combinations(grid);

    let fit_seed = seeds::derive(seed, &[seeds::tag::GRID]);
    let evaluated: Vec<Result<f64, HarnessError>> = combos
        .par_iter()
        .map(|assignments| {
            let mut spec = base.clone();
            for (name, value) in assignments {
                spec = spec.with_parameter(name, *value)?;
            }
            let model = spec
                .fit(train, fit_seed)
                .map_err(|e| HarnessError::Config(format!("fit failed: {e}")))?;
            let mut correct = 0usize;
            for sample in val_inner.samples() {
                let predicted = model
                    .predict(&sample.features)
                    .map_err(|e| HarnessError::Config(format!("prediction failed: {e}")))?;
                if predicted == sample.label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / val_inner.len() as f64)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (index, outcome) in evaluated.iter().enumerate() {
        if let Ok(accuracy) = outcome {
            if best.map_or(true, |(_, incumbent)| *accuracy > incumbent) {
                best = Some((index, *accuracy));
            }
        }
    }
    let Some((index, accuracy)) = best else {
        let first_error = evaluated
            .into_iter()
            .find_map(Result::err)
            .expect("no combination succeeded, so at least one error exists");
        return Err(first_error);
    };

    let assignments = combos[index].clone();
    let mut spec = base.clone();
    for (name, value) in &assignments {
        spec = spec.with_parameter(name, *value)?;
    }
    Ok(GridOutcome {
        best: spec,
        assignments,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::harness::config::{KnnParams, TreeParams};

    fn dataset(rows: &[(Vec<f64>, usize)]) -> Dataset {
        let samples = rows
            .iter()
            .map(|(features, label)| Sample {
                features: features.clone(),
                label: *label,
                batch: 0,
            })
            .collect();
        let num_features = rows[0].0.len();
        let num_classes = rows.iter().map(|(_, l)| l + 1).max().unwrap();
        Dataset::from_parts(samples, num_features, num_classes).unwrap()
    }

    /// Train: one class-0 point at the origin and a tight class-1 pair
    /// at 1.1. Validation points sit at 0.5, slightly nearer the lone
    /// class-0 point — a single neighbor gets them right, but three
    /// neighbors let the class-1 pair outvote it.
    fn memorization_task() -> (Dataset, Dataset) {
        let train = dataset(&[
            (vec![0.0], 0),
            (vec![1.1], 1),
            (vec![1.1], 1),
        ]);
        let val = dataset(&[(vec![0.5], 0), (vec![0.45], 0)]);
        (train, val)
    }

    #[test]
    fn singleton_grid_returns_that_combination() {
        let (train, val) = memorization_task();
        let outcome = grid_search(
            &train,
            &val,
            &ModelSpec::Knn(KnnParams::default()),
            &[("k".to_string(), vec![2.0])],
            0,
        )
        .unwrap();
        assert_eq!(outcome.best, ModelSpec::Knn(KnnParams { k: 2 }));
        assert_eq!(outcome.assignments, vec![("k".to_string(), 2.0)]);
    }

    #[test]
    fn selects_the_provably_best_neighbor_count() {
        let (train, val) = memorization_task();
        // k = 1 is strictly better here, even though it is declared last.
        let outcome = grid_search(
            &train,
            &val,
            &ModelSpec::Knn(KnnParams::default()),
            &[("k".to_string(), vec![3.0, 1.0])],
            7,
        )
        .unwrap();
        assert_eq!(outcome.best, ModelSpec::Knn(KnnParams { k: 1 }));
        assert_eq!(outcome.accuracy, 1.0);
    }

    #[test]
    fn ties_resolve_to_declaration_order() {
        let (train, val) = memorization_task();
        // k = 1 and k = 2 both classify the validation points perfectly
        // (the class-0 point dominates by inverse distance); the earlier
        // declared value must win.
        let outcome = grid_search(
            &train,
            &val,
            &ModelSpec::Knn(KnnParams::default()),
            &[("k".to_string(), vec![2.0, 1.0])],
            7,
        )
        .unwrap();
        assert_eq!(outcome.best, ModelSpec::Knn(KnnParams { k: 2 }));
    }

    #[test]
    fn combinations_enumerate_first_axis_slowest() {
        let grid = [
            ("a".to_string(), vec![1.0, 2.0]),
            ("b".to_string(), vec![3.0, 4.0, 5.0]),
        ];
        let combos = enumerate_combinations(&grid);
        let flat: Vec<(f64, f64)> = combos.iter().map(|c| (c[0].1, c[1].1)).collect();
        assert_eq!(
            flat,
            vec![
                (1.0, 3.0),
                (1.0, 4.0),
                (1.0, 5.0),
                (2.0, 3.0),
                (2.0, 4.0),
                (2.0, 5.0),
            ]
        );
    }

    #[test]
    fn repeated_axis_names_apply_in_declaration_order() {
        let (train, val) = memorization_task();
        // The later axis overwrites the earlier one for the same name, so
        // the fitted trees have depth 4 or 5; everything ties on this easy
        // task and the first combination wins.
        let outcome = grid_search(
            &train,
            &val,
            &ModelSpec::DecisionTree(TreeParams::default()),
            &[
                ("max_depth".to_string(), vec![2.0, 3.0]),
                ("max_depth".to_string(), vec![4.0, 5.0]),
            ],
            3,
        )
        .unwrap();
        assert_eq!(outcome.best, ModelSpec::DecisionTree(TreeParams { max_depth: 4 }));
        assert_eq!(
            outcome.assignments,
            vec![
                ("max_depth".to_string(), 2.0),
                ("max_depth".to_string(), 4.0),
            ]
        );
    }

    #[test]
    fn same_inputs_same_selection() {
        let (train, val) = memorization_task();
        let grid = [("k".to_string(), vec![3.0, 1.0, 2.0])];
        let base = ModelSpec::Knn(KnnParams::default());
        let a = grid_search(&train, &val, &base, &grid, 11).unwrap();
        let b = grid_search(&train, &val, &base, &grid, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_grids_and_axes_are_rejected() {
        let (train, val) = memorization_task();
        let base = ModelSpec::Knn(KnnParams::default());
        assert!(grid_search(&train, &val, &base, &[], 0).is_err());
        assert!(grid_search(&train, &val, &base, &[("k".to_string(), vec![])], 0).is_err());
        assert!(grid_search(&train, &val, &base, &[("q".to_string(), vec![1.0])], 0).is_err());
    }

    #[test]
    fn failing_combinations_are_skipped() {
        let (train, val) = memorization_task();
        // k = 50 exceeds the training size and cannot fit; k = 1 wins.
        let outcome = grid_search(
            &train,
            &val,
            &ModelSpec::Knn(KnnParams::default()),
            &[("k".to_string(), vec![50.0, 1.0])],
            0,
        )
        .unwrap();
        assert_eq!(outcome.best, ModelSpec::Knn(KnnParams { k: 1 }));

        let all_fail = grid_search(
            &train,
            &val,
            &ModelSpec::Knn(KnnParams::default()),
            &[("k".to_string(), vec![50.0, 60.0])],
            0,
        );
        assert!(all_fail.is_err());
    }

    #[test]
    fn inner_split_is_seeded_and_partitions_the_data() {
        let rows: Vec<(Vec<f64>, usize)> = (0..20)
            .map(|i| (vec![i as f64, (i * 7 % 5) as f64], i % 2))
            .collect();
        let data = dataset(&rows);
        let (a_train, a_val) = inner_split(&data, 0.8, 5).unwrap();
        assert_eq!(a_train.len(), 16);
        assert_eq!(a_val.len(), 4);
        let (b_train, _) = inner_split(&data, 0.8, 5).unwrap();
        assert_eq!(a_train.samples(), b_train.samples());
        let (c_train, _) = inner_split(&data, 0.8, 6).unwrap();
        assert_ne!(a_train.samples(), c_train.samples());

        // Nothing lost, nothing duplicated.
        let mut seen: Vec<f64> = a_train
            .samples()
            .iter()
            .chain(a_val.samples())
            .map(|s| s.features[0])
            .collect();
        seen.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(seen, expected);

        assert!(inner_split(&data, 0.0, 0).is_err());
        assert!(inner_split(&data, 1.0, 0).is_err());
    }
}
