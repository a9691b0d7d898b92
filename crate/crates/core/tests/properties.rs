use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use psynorm::align::{align_sequences, AlignedPrediction, EditOp};
use psynorm::baselines::{evaluate_splits, fit_ols, FeatureMatrix, FitOptions};
use psynorm::corpus::{load_canonical, split_dataset, write_dataset, Dataset, DatasetKind, NormRecord, RtSentence};
use psynorm::metrics::{pearson, r2_of_predictions, rt_series, PairedSeries, R2Mode};
use psynorm::parse::{format_duration_map, parse_duration_map, parse_scalar_rating, MapStatus};

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z][a-z']{0,7}[a-z.,!?]?"
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "the", "cat"]).prop_map(String::from),
        0..max,
    )
}

fn series(p: &[f64], t: &[f64]) -> PairedSeries {
    PairedSeries::new((0..p.len()).map(|i| i.to_string()).collect(), p.to_vec(), t.to_vec()).unwrap()
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn duration_maps_round_trip(pairs in prop::collection::vec((word(), 0u32..5000), 1..15)) {
        let values: Vec<String> = pairs.iter().map(|(_, v)| v.to_string()).collect();
        let text = format_duration_map(pairs.iter().zip(&values).map(|((w, _), v)| (w.as_str(), v.as_str())));
        let m = parse_duration_map(&text);
        prop_assert_eq!(m.status, MapStatus::Ok);
        let want: Vec<(String, f64)> = pairs.iter().map(|(w, v)| (w.clone(), *v as f64)).collect();
        prop_assert_eq!(&m.pairs, &want);
        prop_assert_eq!(parse_duration_map(&m.to_text()).pairs, want);
    }

    #[test]
    fn scalar_ratings_stay_in_unit_interval(text in ".{0,40}") {
        let p = parse_scalar_rating(&text);
        if let Some(v) = p.value {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(p.raw, text);
    }

    #[test]
    fn alignment_is_a_metric(a in words(7), b in words(7), c in words(7)) {
        let ab = align_sequences(&a, &b).cost;
        prop_assert_eq!(ab, align_sequences(&b, &a).cost);
        prop_assert!(align_sequences(&a, &c).cost <= ab + align_sequences(&b, &c).cost);
        prop_assert!(ab >= a.len().abs_diff(b.len()));
        prop_assert_eq!(align_sequences(&a, &a).cost, 0);
    }

    #[test]
    fn alignment_script_is_consistent(a in words(8), b in words(8)) {
        let al = align_sequences(&a, &b);
        let refs: Vec<usize> = al.ops.iter().filter_map(|s| s.ref_index).collect();
        let hyps: Vec<usize> = al.ops.iter().filter_map(|s| s.hyp_index).collect();
        prop_assert_eq!(refs, (0..a.len()).collect::<Vec<_>>());
        prop_assert_eq!(hyps, (0..b.len()).collect::<Vec<_>>());
        let paid = al.ops.iter().filter(|s| s.op != EditOp::Match).count();
        prop_assert_eq!(paid, al.cost);
        for s in &al.ops {
            if let (Some(i), Some(j)) = (s.ref_index, s.hyp_index) {
                prop_assert_eq!(s.op == EditOp::Match, a[i] == b[j]);
            }
        }
    }

    #[test]
    fn ols_residuals_are_orthogonal(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 8..40),
        y_raw in prop::collection::vec(-10.0f64..10.0, 40),
    ) {
        let x = matrix(&rows);
        let y = DVector::from_iterator(rows.len(), y_raw.into_iter().take(rows.len()));
        let fit = fit_ols(&x, &y).unwrap();
        let resid = &y - fit.predict(&x).unwrap();
        let scale = 1.0 + y.amax() * x.amax() * rows.len() as f64;
        prop_assert!(resid.sum().abs() <= 1e-9 * scale);
        for g in (x.transpose() * &resid).iter() {
            prop_assert!(g.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn duplicated_columns_do_not_change_predictions(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..30),
        beta in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let x = matrix(&rows);
        let y = &x * DVector::from_vec(beta) + DVector::from_fn(rows.len(), |i, _| (i % 3) as f64 * 0.1);
        let wide = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][if j == 2 { 0 } else { j }]);
        let narrow = fit_ols(&x, &y).unwrap();
        let dup = fit_ols(&wide, &y).unwrap();
        prop_assert!(dup.rank <= 2);
        let d = narrow.predict(&x).unwrap() - dup.predict(&wide).unwrap();
        prop_assert!(d.amax() <= 1e-8 * (1.0 + y.amax()));
        prop_assert!((dup.coefficients[0] - dup.coefficients[2]).abs() <= 1e-8 * (1.0 + dup.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()))));
    }

    #[test]
    fn splits_partition_the_ids(n in 4usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let d = norms(n);
        prop_assume!(((frac * n as f64) as usize) >= 1 && ((frac * n as f64) as usize) < n);
        let (train, eval) = split_dataset(&d, frac, seed).unwrap();
        let tr: HashSet<String> = train.ids().into_iter().collect();
        let ev: HashSet<String> = eval.ids().into_iter().collect();
        prop_assert!(tr.is_disjoint(&ev));
        prop_assert_eq!(tr.len() + ev.len(), n);
        prop_assert_eq!(tr.len(), (frac * n as f64 + 1e-9).floor() as usize);

        let mut reversed = d.clone();
        if let psynorm::corpus::Items::Norms(r) = &mut reversed.items {
            r.reverse();
        }
        let (train2, _) = split_dataset(&reversed, frac, seed).unwrap();
        let tr2: HashSet<String> = train2.ids().into_iter().collect();
        prop_assert_eq!(tr, tr2);
    }

    #[test]
    fn split_evaluation_ignores_row_order(seed in any::<u64>(), rot in 1usize..39) {
        let n = 40;
        let ids: Vec<String> = (0..n).map(|i| format!("r{i:02}")).collect();
        let xs: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 2.0 * x + ((i * 7) % 5) as f64).collect();
        let fm = |order: &[usize]| {
            FeatureMatrix::new(
                order.iter().map(|&i| ids[i].clone()).collect(),
                None,
                vec!["x".into()],
                DMatrix::from_fn(n, 1, |r, _| xs[order[r]]),
                DVector::from_fn(n, |r, _| ys[order[r]]),
            )
            .unwrap()
        };
        let straight: Vec<usize> = (0..n).collect();
        let mut rotated = straight.clone();
        rotated.rotate_left(rot);
        let a = evaluate_splits(&fm(&straight), 12, 0.75, seed, FitOptions::default()).unwrap();
        let b = evaluate_splits(&fm(&rotated), 12, 0.75, seed, FitOptions::default()).unwrap();
        prop_assert_eq!(a.r2_values, b.r2_values);
    }

    #[test]
    fn canonical_files_round_trip(
        records in prop::collection::btree_map("[a-z]{1,6}", (word(), 0u32..=100, prop::option::of(-50.0f64..50.0)), 1..20),
        sentences in prop::collection::vec(prop::collection::vec((word(), 1u32..2000), 1..8), 1..6),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<NormRecord> = records
            .into_iter()
            .map(|(id, (text, cents, f))| NormRecord {
                id,
                text,
                score: cents as f64 / 100.0,
                features: f.map(|v| BTreeMap::from([("frequency".to_string(), v)])).unwrap_or_default(),
                embedding: None,
            })
            .collect();
        let d = Dataset::norms(DatasetKind::WordMem, recs).unwrap();
        let files = write_dataset(&d, dir.path()).unwrap();
        prop_assert_eq!(load_canonical(&files, DatasetKind::WordMem).unwrap(), d);

        let sents: Vec<RtSentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(i, toks)| RtSentence::from_pairs(format!("s{i}"), toks.into_iter().map(|(w, r)| (w, r as f64))))
            .collect();
        let d = Dataset::rt(DatasetKind::RtEt, sents).unwrap();
        let files = write_dataset(&d, dir.path()).unwrap();
        prop_assert_eq!(load_canonical(&files, DatasetKind::RtEt).unwrap(), d);
    }

    #[test]
    fn squared_pearson_ignores_prediction_scale(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50),
        a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        b in -100.0f64..100.0,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let s = series(&p, &t);
        prop_assume!(pearson(&s).is_ok());
        let scaled: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let base = r2_of_predictions(&s, R2Mode::SquaredPearson).unwrap();
        let moved = r2_of_predictions(&series(&scaled, &t), R2Mode::SquaredPearson).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9);
        let r = pearson(&s).unwrap();
        let flipped = pearson(&series(&scaled, &t)).unwrap();
        prop_assert!((flipped - a.signum() * r).abs() <= 1e-9);
    }

    #[test]
    fn corpus_level_series_is_the_concatenation(
        sentences in prop::collection::vec(prop::collection::vec((100u32..900, prop::option::of(100u32..900)), 1..6), 1..8),
    ) {
        let mut sents = Vec::new();
        let mut preds = Vec::new();
        let (mut p_all, mut t_all, mut missing) = (Vec::new(), Vec::new(), 0);
        for (i, toks) in sentences.iter().enumerate() {
            let id = format!("s{i}");
            sents.push(RtSentence::from_pairs(id.clone(), toks.iter().map(|(t, _)| ("w", *t as f64))));
            preds.push(AlignedPrediction {
                sentence_id: id,
                values: toks.iter().map(|(_, p)| p.map(|v| v as f64)).collect(),
                coverage: 0.0,
            });
            for (t, p) in toks {
                match p {
                    Some(p) => {
                        p_all.push(*p as f64);
                        t_all.push(*t as f64);
                    }
                    None => missing += 1,
                }
            }
        }
        let s = rt_series(&preds, &sents);
        prop_assert_eq!(&s.predicted, &p_all);
        prop_assert_eq!(&s.truth, &t_all);
        prop_assert_eq!(s.excluded, missing);
        match (pearson(&s), pearson(&series(&p_all, &t_all))) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

fn norms(n: usize) -> Dataset {
    Dataset::norms(
        DatasetKind::WordMem,
        (0..n)
            .map(|i| NormRecord {
                id: format!("w{i:04}"),
                text: format!("w{i}"),
                score: 0.5,
                features: BTreeMap::new(),
                embedding: None,
            })
            .collect(),
    )
    .unwrap()
}
