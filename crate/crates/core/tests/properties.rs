//! Randomized invariants: structural properties that must hold for every
//! generated input, not just hand-picked examples.

use moce_core::dataset::{split, standardize, Subject, SurvivalDataset, ZeroVariancePolicy};
use moce_core::eval::{comparable_pairs, concordance_index, TiePolicy};
use moce_core::model::{Activation, GatingKind, ModelSpec, MoceModel};
use moce_core::objective::{elbo_term, exact_term, rt_term, ENUMERATION_CAP};
use ndarray::Array2;
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

/// Distinct positive event times in random order.
fn distinct_times(n: usize) -> impl Strategy<Value = Vec<f64>> {
    btree_set(1u32..1_000_000, n)
        .prop_map(|s| s.into_iter().map(|t| t as f64 * 0.001).collect::<Vec<f64>>())
        .prop_shuffle()
}

fn untied_dataset(min_n: usize, max_n: usize) -> impl Strategy<Value = SurvivalDataset> {
    (min_n..=max_n).prop_flat_map(|n| {
        (distinct_times(n), vec(any::<bool>(), n), vec(-3.0..3.0f64, n)).prop_map(
            |(times, events, covs)| {
                let subjects = times
                    .into_iter()
                    .zip(events)
                    .zip(covs)
                    .map(|((t, e), x)| Subject {
                        covariates: vec![x],
                        event_time: t,
                        event_observed: e,
                    })
                    .collect();
                SurvivalDataset::new(subjects).unwrap()
            },
        )
    })
}

/// Random per-subject (eta, gate) arrays; gates are softmaxed uniforms.
fn instance_arrays(n: usize, k: usize) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (
        vec(-1.0..1.0f64, n * k),
        vec(-1.0..1.0f64, n * k),
    )
        .prop_map(move |(eta_raw, logit_raw)| {
            let eta = Array2::from_shape_vec((n, k), eta_raw).unwrap();
            let mut gate = Array2::from_shape_vec((n, k), logit_raw).unwrap();
            for mut row in gate.rows_mut() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            (eta, gate)
        })
}

fn model_spec_strategy() -> impl Strategy<Value = ModelSpec> {
    let gating = prop_oneof![
        Just(GatingKind::Linear),
        (vec(1usize..4, 1..3), prop_oneof![
            Just(Activation::Relu),
            Just(Activation::Selu),
            Just(Activation::Sigmoid)
        ])
            .prop_map(|(hidden, activation)| GatingKind::Mlp { hidden, activation }),
    ];
    (1usize..4, 1usize..4, gating).prop_map(|(d, k, gating)| ModelSpec {
        n_features: d,
        n_experts: k,
        gating,
    })
}

proptest! {
    #[test]
    fn softmax_sums_shift_invariant(logits in vec(-40.0..40.0f64, 1..6), shift in -25.0..25.0f64) {
        // with d = 1 and x = (1.0), the gating weights are the logits
        let k = logits.len();
        let spec = ModelSpec { n_features: 1, n_experts: k, gating: GatingKind::Linear };
        let experts = Array2::zeros((k, 1));
        let weights = Array2::from_shape_vec((k, 1), logits.clone()).unwrap();
        let model = MoceModel::from_parts(spec.clone(), experts.clone(), vec![weights]).unwrap();
        let probs = model.gating_probs_one(&[1.0]);

        prop_assert!(probs.iter().all(|&p| p > 0.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let weights = Array2::from_shape_vec((k, 1), shifted).unwrap();
        let model2 = MoceModel::from_parts(spec, experts, vec![weights]).unwrap();
        let probs2 = model2.gating_probs_one(&[1.0]);
        for (a, b) in probs.iter().zip(&probs2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn risk_sets_nest_and_count(ds in untied_dataset(2, 24)) {
        let n = ds.len();
        let mut total_members = 0usize;
        for i in 0..n {
            let rs = ds.risk_set(i).unwrap();
            prop_assert!(rs.members.contains(&i));
            let ti = ds.subject(i).event_time;
            for j in 0..n {
                let member = rs.members.contains(&j);
                prop_assert_eq!(member, ds.subject(j).event_time >= ti);
            }
            total_members += rs.members.len();
        }
        prop_assert_eq!(total_members, n * (n + 1) / 2);

        // monotone: earlier anchors have superset risk sets
        for a in 0..n {
            for b in 0..n {
                if ds.subject(a).event_time < ds.subject(b).event_time {
                    let ra = ds.risk_set(a).unwrap().members;
                    let rb = ds.risk_set(b).unwrap().members;
                    prop_assert!(rb.iter().all(|j| ra.contains(j)));
                }
            }
        }
    }

    #[test]
    fn standardize_is_idempotent(ds in untied_dataset(3, 20)) {
        let (once, _) = standardize(&ds, ZeroVariancePolicy::Keep).unwrap();
        let (twice, _) = standardize(&once, ZeroVariancePolicy::Keep).unwrap();
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.subjects().iter().zip(twice.subjects()) {
            for (x, y) in a.covariates.iter().zip(&b.covariates) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
        // non-constant columns end up centered and unit-scaled
        let n = once.len() as f64;
        for j in 0..once.dim() {
            let vals: Vec<f64> = once.subjects().iter().map(|s| s.covariates[j]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn split_partitions_subjects(ds in untied_dataset(20, 60), seed in any::<u64>()) {
        let (tr, va, te) = split(&ds, 0.6, 0.2, seed, false).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), ds.len());
        // distinct times act as subject identities
        let mut seen = std::collections::BTreeSet::new();
        for part in [&tr, &va, &te] {
            for s in part.subjects() {
                prop_assert!(seen.insert(s.event_time.to_bits()), "overlapping splits");
            }
        }
        let full: std::collections::BTreeSet<u64> =
            ds.subjects().iter().map(|s| s.event_time.to_bits()).collect();
        prop_assert_eq!(seen, full);
    }

    #[test]
    fn soft_hazard_within_expert_envelope(
        spec in model_spec_strategy(),
        seed in any::<u64>(),
        x_raw in vec(-2.0..2.0f64, 3),
    ) {
        let model = MoceModel::random(spec.clone(), 0.6, seed).unwrap();
        let x: Vec<f64> = x_raw.iter().take(spec.n_features).cloned().collect();
        let x = if x.len() < spec.n_features {
            let mut full = x;
            full.resize(spec.n_features, 0.5);
            full
        } else { x };
        let per_expert: Vec<f64> = (0..spec.n_experts)
            .map(|k| {
                model.experts().row(k).iter().zip(&x).map(|(b, v)| b * v).sum::<f64>().exp()
            })
            .collect();
        let lo = per_expert.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = per_expert.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let soft = model.hazard_soft(&x);
        prop_assert!(soft >= lo - 1e-12 * lo.abs().max(1.0));
        prop_assert!(soft <= hi + 1e-12 * hi.abs().max(1.0));
    }

    #[test]
    fn hard_hazard_ignores_gating_scale(
        k in 2usize..4,
        d in 1usize..4,
        seed in any::<u64>(),
        scale in 0.05..20.0f64,
        x_raw in vec(-2.0..2.0f64, 3),
    ) {
        let spec = ModelSpec { n_features: d, n_experts: k, gating: GatingKind::Linear };
        let model = MoceModel::random(spec.clone(), 0.5, seed).unwrap();
        let scaled = MoceModel::from_parts(
            spec,
            model.experts().clone(),
            model.gating_layers().iter().map(|w| w * scale).collect(),
        )
        .unwrap();
        let mut x: Vec<f64> = x_raw.iter().take(d).cloned().collect();
        x.resize(d, 0.5);
        prop_assert_eq!(model.hazard_hard(&x), scaled.hazard_hard(&x));
    }

    #[test]
    fn concordance_rank_only_and_reversal(
        ds in untied_dataset(3, 25),
        hazard_keys in btree_set(1u32..1_000_000, 25),
    ) {
        let keys: Vec<f64> = hazard_keys.into_iter().map(|v| v as f64 * 1e-3 + 0.5).collect();
        let hazards: Vec<f64> = (0..ds.len()).map(|i| keys[i % keys.len()]).collect();
        prop_assume!(ds.len() <= keys.len()); // keep hazards distinct
        let base = match concordance_index(&hazards, &ds, TiePolicy::Strict) {
            Ok(r) => r,
            Err(_) => return Ok(()), // no comparable pairs in this draw
        };

        // strictly increasing transform preserves everything
        let mapped: Vec<f64> = hazards.iter().map(|h| 2.0 * h + 1.0).collect();
        let same = concordance_index(&mapped, &ds, TiePolicy::Strict).unwrap();
        prop_assert_eq!(base, same);

        // strictly decreasing transform flips strict concordance
        let flipped: Vec<f64> = hazards.iter().map(|h| 1.0 / h).collect();
        let rev = concordance_index(&flipped, &ds, TiePolicy::Strict).unwrap();
        prop_assert_eq!(base.n_tied_predictions, 0);
        prop_assert!((base.c_index + rev.c_index - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_censored_has_no_comparable_pairs(times in distinct_times(8)) {
        let subjects = times
            .into_iter()
            .map(|t| Subject { covariates: vec![0.0], event_time: t, event_observed: false })
            .collect();
        let ds = SurvivalDataset::new(subjects).unwrap();
        prop_assert!(comparable_pairs(&ds).is_empty());
    }

    #[test]
    fn lower_bound_ordering(
        ds in untied_dataset(2, 7),
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let n = ds.len();
        let (eta, gate) = {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let eta = Array2::from_shape_fn((n, k), |_| rng.gen::<f64>() * 2.0 - 1.0);
            let mut gate = Array2::from_shape_fn((n, k), |_| rng.gen::<f64>() * 2.0 - 1.0);
            for mut row in gate.rows_mut() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() { *v = (*v - max).exp(); total += *v; }
                for v in row.iter_mut() { *v /= total; }
            }
            (eta, gate)
        };
        for anchor in 0..n {
            if !ds.subject(anchor).event_observed {
                continue;
            }
            let exact = exact_term(&ds, &eta, &gate, anchor, ENUMERATION_CAP).unwrap();
            let rt = rt_term(&ds, &eta, &gate, anchor).unwrap();
            let lower = elbo_term(&ds, &eta, &gate, anchor).unwrap();
            prop_assert!(lower <= exact + 1e-9, "elbo {} > exact {}", lower, exact);
            prop_assert!(lower <= rt + 1e-9, "elbo {} > rt {}", lower, rt);
        }
    }

    #[test]
    fn model_round_trip_any_architecture(spec in model_spec_strategy(), seed in any::<u64>()) {
        let model = MoceModel::random(spec, 0.7, seed).unwrap();
        let mut buf = Vec::new();
        model.write_text(&mut buf, None).unwrap();
        let (loaded, std) = MoceModel::read_text(&buf[..]).unwrap();
        prop_assert_eq!(model, loaded);
        prop_assert!(std.is_none());
    }
}

#[test]
fn instance_arrays_strategy_is_well_formed() {
    // strategy self-check: rows of the generated gates sum to one
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let tree = instance_arrays(5, 3).new_tree(&mut runner).unwrap();
    let (eta, gate) = tree.current();
    assert_eq!(eta.dim(), (5, 3));
    for row in gate.rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
