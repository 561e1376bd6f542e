use autothorax_core::data::{DatasetMode, FeatureVector, Label};
use autothorax_core::encoder::EncoderPipelineConfig;
use autothorax_core::eval::{
    confusion, roc, run_cv, youden, CvMethod, CvSetup, ThresholdMode, DEFAULT_K_LIST,
};
use autothorax_core::exec::Sequential;
use autothorax_core::synth::synth_vectors;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probability a random positive outscores a random negative, ties half.
fn mann_whitney(scores: &[f64], labels: &[Label]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| l.is_positive()).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| !l.is_positive()).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> (Vec<f64>, Vec<Label>) {
    let labels: Vec<Label> = (0..n).map(|i| Label::from_bool(i % 3 == 0 || rng.gen_bool(0.2))).collect();
    let scores = labels
        .iter()
        .map(|l| {
            let shift = if l.is_positive() { 0.15 } else { 0.0 };
            (((rng.gen::<f64>() + shift) * f64::from(levels)).floor() / f64::from(levels)).min(1.0)
        })
        .collect();
    (scores, labels)
}

#[test]
fn auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let levels = [5, 20, 1000, 1_000_000][case % 4];
        let (s, l) = random_set(&mut rng, 1000, levels);
        let c = roc(&s, &l).unwrap();
        let want = mann_whitney(&s, &l);
        assert!((c.auc - want).abs() <= 1e-9, "case {case}: {} vs {want}", c.auc);
    }
}

/// Every candidate threshold evaluated directly; returns (threshold, j).
fn exhaustive_youden(scores: &[f64], labels: &[Label]) -> (f64, f64, f64) {
    let mut cands: Vec<f64> = scores.to_vec();
    cands.push(f64::INFINITY);
    cands.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cands.dedup();
    let mut best: Option<(f64, f64, f64)> = None;
    for t in cands {
        let c = confusion(scores, labels, t).unwrap();
        let (se, sp) = (c.sensitivity(), c.specificity());
        let j = se + sp - 1.0;
        let better = match best {
            None => true,
            Some((bt, bj, bse)) => j > bj || (j == bj && (se > bse || (se == bse && t < bt))),
        };
        if better {
            best = Some((t, j, se));
        }
    }
    best.unwrap()
}

#[test]
fn youden_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..200 {
        let n = rng.gen_range(2..300);
        let (s, mut l) = random_set(&mut rng, n, [3, 10, 100_000][case % 3]);
        l[0] = Label::Positive;
        l[1] = Label::Negative;
        let c = roc(&s, &l).unwrap();
        let y = youden(&c);
        let (t, j, se) = exhaustive_youden(&s, &l);
        assert_eq!((y.threshold, y.j, y.sensitivity), (t, j, se), "case {case}");
        let at = confusion(&s, &l, y.threshold).unwrap();
        assert_eq!((at.sensitivity(), at.specificity()), (y.sensitivity, y.specificity));
    }
}

#[test]
fn uninformative_scores_give_half() {
    let l: Vec<Label> = (0..50).map(|i| Label::from_bool(i % 2 == 0)).collect();
    assert_eq!(roc(&[0.4; 50], &l).unwrap().auc, 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_invariant_under_increasing_maps(seed in any::<u64>(), n in 2usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, mut l) = random_set(&mut rng, n, 64);
        l[0] = Label::Positive;
        l[1] = Label::Negative;
        let base = roc(&s, &l).unwrap().auc;
        let cubed: Vec<f64> = s.iter().map(|x| x * x * x).collect();
        let affine: Vec<f64> = s.iter().map(|x| 2.0 * x + 1.0).collect();
        prop_assert!((roc(&cubed, &l).unwrap().auc - base).abs() <= 1e-12);
        prop_assert!((roc(&affine, &l).unwrap().auc - base).abs() <= 1e-12);
    }

    #[test]
    fn roc_shape(seed in any::<u64>(), n in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, mut l) = random_set(&mut rng, n, 16);
        l[0] = Label::Positive;
        l[1] = Label::Negative;
        let c = roc(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.auc));
        prop_assert!(c.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].sensitivity <= w[1].sensitivity));
        let last = c.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.sensitivity), (1.0, 1.0));
        let flipped: Vec<Label> = l.iter().map(|x| Label::from_bool(!x.is_positive())).collect();
        prop_assert!((roc(&s, &flipped).unwrap().auc - (1.0 - c.auc)).abs() <= 1e-12);
    }
}

fn phi(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 erf approximation, |err| < 1.5e-7.
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z.abs());
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    0.5 * (1.0 + erf.copysign(z))
}

fn setup_for<'a>(m: &'a autothorax_core::data::DatasetManifest, v: &'a [FeatureVector], method: CvMethod) -> CvSetup<'a> {
    let mut s = CvSetup::new(m, v, method);
    s.seed = 17;
    s
}

#[test]
fn cv_report_shape_and_consistency() {
    let (m, v) = synth_vectors(150, 150, 8, 2.0, 1).unwrap();
    let r = run_cv(&setup_for(&m, &v, CvMethod::Raw), &Sequential).unwrap();
    assert_eq!(r.per_fold.len(), 10 * DEFAULT_K_LIST.len());
    assert_eq!(r.summaries.len(), DEFAULT_K_LIST.len());
    assert!(r.summaries_consistent());
    assert_eq!(r.references.len(), 25);
    let head = r.references.iter().find(|x| x.method == "AutoThorax-Net" && x.k == Some(1001)).unwrap();
    assert_eq!((head.sensitivity, head.specificity, head.auc), (73, 75, 82));
    // 270 archive entries < 501, 1001
    assert!(r.fold_reports(1001).all(|f| f.truncated));
    assert!(r.fold_reports(11).all(|f| !f.truncated && f.archive_size + f.validation_size == 300));
}

#[test]
fn separation_controls_auc() {
    // Bayes-optimal AUC of the generator is Phi(sep / sqrt 2); a 51-NN vote
    // on 8 dims gets close at high separation and stays near 0.5 at zero.
    let (m, v) = synth_vectors(300, 300, 8, 4.0, 2).unwrap();
    let mut s = setup_for(&m, &v, CvMethod::Raw);
    s.k_list = vec![51];
    let high = run_cv(&s, &Sequential).unwrap();
    let bayes = phi(4.0 / 2f64.sqrt());
    assert!(bayes > 0.99);
    assert!(high.summaries[0].auc_mean >= 0.95, "auc {}", high.summaries[0].auc_mean);
    assert!(high.summaries[0].auc_mean <= bayes + 0.01);

    let (m, v) = synth_vectors(300, 300, 8, 0.0, 2).unwrap();
    let mut s = setup_for(&m, &v, CvMethod::Raw);
    s.k_list = vec![51];
    let null = run_cv(&s, &Sequential).unwrap();
    assert!((null.summaries[0].pooled.auc - 0.5).abs() <= 0.05, "null auc {}", null.summaries[0].pooled.auc);
}

#[test]
fn semi_population_is_a_subset() {
    let mut set = autothorax_core::synth::SynthParams::new(40, 60, 3);
    set.other_fraction = 0.5;
    let full = autothorax_core::synth::SyntheticImageSet::new(set).unwrap().manifest().unwrap();
    let semi = full.with_mode(DatasetMode::SemiAutomated);
    assert!(semi.records().iter().all(|r| full.get(&r.id) == Some(r)));
    assert_eq!(semi.counts().total.positive, full.counts().total.positive);
    assert_eq!(semi.len(), 70);
}

/// Perturbing one fold's validation vectors must not change anything fitted
/// for that fold: with archive-side thresholds, the fold's threshold depends
/// only on the fitted transform and the archive.
#[test]
fn transforms_never_see_validation_vectors() {
    let (m, v) = synth_vectors(40, 40, 12, 2.0, 4).unwrap();
    let m = autothorax_core::data::assign_folds(&m, 4, 9, false).unwrap();
    let mut pipeline = EncoderPipelineConfig::for_input(12);
    pipeline.replication = false;
    pipeline.bottleneck = 4;
    pipeline.hidden_schedule = vec![8];
    pipeline.epochs = 3;
    pipeline.batch_size = 16;
    for method in [CvMethod::Pca { components: 3 }, CvMethod::AutoThorax(pipeline)] {
        let run = |vectors: &[FeatureVector]| {
            let mut s = CvSetup::new(&m, vectors, method.clone());
            s.folds = 4;
            s.k_list = vec![3, 7];
            s.threshold_mode = ThresholdMode::ArchiveHeldOut;
            run_cv(&s, &Sequential).unwrap()
        };
        let base = run(&v);
        let mut poked = v.clone();
        for (vec, rec) in poked.iter_mut().zip(m.records()) {
            if rec.fold == Some(0) {
                vec.values.iter_mut().for_each(|x| *x = *x * 3.0 + 5.0);
            }
        }
        let after = run(&poked);
        let fold0 = |r: &autothorax_core::eval::ExperimentReport| -> Vec<f64> {
            r.per_fold.iter().filter(|f| f.fold == 0).map(|f| f.threshold).collect()
        };
        assert_eq!(fold0(&base), fold0(&after), "{}", method.name());
        // Sanity: the poke did reach the queries.
        assert_ne!(base.per_fold, after.per_fold);
    }
}

#[test]
fn cv_errors() {
    let (m, v) = synth_vectors(5, 50, 4, 1.0, 1).unwrap();
    assert!(run_cv(&setup_for(&m, &v, CvMethod::Raw), &Sequential).is_err());
    let (m, v) = synth_vectors(30, 30, 4, 1.0, 1).unwrap();
    let mut s = setup_for(&m, &v[..40], CvMethod::Raw);
    assert!(run_cv(&s, &Sequential).is_err());
    s.vectors = &v;
    s.k_list = vec![0];
    assert!(run_cv(&s, &Sequential).is_err());
}
