//! Mask quality metrics: precision/recall areas against a known salient set,
//! temporal discreteness, binary entropy, top-fraction binarization and the
//! dataset-level cross-entropy of masked predictions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{checked_predict, DEFAULT_LOG_CLAMP};
use crate::model::BlackBoxModel;
use crate::perturbation::{apply_mask, PerturbationSpec};
use crate::scalar::Scalar;
use crate::series::{DenseMask, TaskKind, TimeSeries};

/// The set of truly salient points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    d_features: usize,
    t_steps: usize,
    salient: BTreeSet<(usize, usize)>,
    dense: Vec<bool>,
}

impl GroundTruth {
    /// Builds from 0-based `(feature, time)` points; duplicates collapse.
    pub fn new(
        d_features: usize,
        t_steps: usize,
        points: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if d_features == 0 || t_steps == 0 {
            return Err(Error::Dimension("ground truth needs a non-empty shape".into()));
        }
        let salient: BTreeSet<(usize, usize)> = points.into_iter().collect();
        if salient.is_empty() {
            return Err(Error::Dimension("ground truth needs at least one salient point".into()));
        }
        let mut dense = vec![false; d_features * t_steps];
        for &(d, t) in &salient {
            if d >= d_features || t >= t_steps {
                return Err(Error::Dimension(format!(
                    "salient point ({}, {}) outside {d_features}x{t_steps}",
                    d + 1,
                    t + 1
                )));
            }
            dense[d * t_steps + t] = true;
        }
        Ok(Self {
            d_features,
            t_steps,
            salient,
            dense,
        })
    }

    pub fn from_dense(d_features: usize, t_steps: usize, dense: &[bool]) -> Result<Self> {
        if dense.len() != d_features * t_steps {
            return Err(Error::Dimension(format!(
                "{} flags cannot fill {d_features}x{t_steps}",
                dense.len()
            )));
        }
        Self::new(
            d_features,
            t_steps,
            dense
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| (i / t_steps, i % t_steps)),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d_features, self.t_steps)
    }

    pub fn d_features(&self) -> usize {
        self.d_features
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    /// Salient points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.salient.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.salient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.salient.is_empty()
    }

    pub fn contains(&self, d: usize, t: usize) -> bool {
        d < self.d_features && t < self.t_steps && self.dense[d * self.t_steps + t]
    }

    pub fn dense(&self) -> &[bool] {
        &self.dense
    }

    pub fn to_mask<S: Scalar>(&self) -> DenseMask<S> {
        DenseMask::from_binary(self.d_features, self.t_steps, &self.dense)
            .expect("shape checked at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Jump size above which adjacent entries count as a discontinuity.
    pub discreteness_threshold: f64,
    /// Thresholds at which precision and recall are sampled.
    pub alpha_grid: Vec<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            discreteness_threshold: 0.10,
            alpha_grid: (1..=99).map(|k| k as f64 / 100.0).collect(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let beta = self.discreteness_threshold;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("discreteness threshold {beta} not in (0, 1)")));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha grid is empty".into()));
        }
        if self.alpha_grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Config("alpha grid entries must lie in (0, 1)".into()));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("alpha grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `m ≥ α`, elementwise.
pub fn binarize<S: Scalar>(m: &DenseMask<S>, alpha: f64) -> Vec<bool> {
    let alpha = S::from_f64_lossy(alpha);
    m.values().iter().map(|&v| v >= alpha).collect()
}

/// Precision and recall of the thresholded mask. Precision is `None` when
/// nothing passes the threshold.
pub fn precision_recall<S: Scalar>(
    m: &DenseMask<S>,
    gt: &GroundTruth,
    alpha: f64,
) -> Result<(Option<f64>, f64)> {
    check_gt_shape(m, gt)?;
    let selected = binarize(m, alpha);
    let (mut hits, mut chosen) = (0usize, 0usize);
    for (&s, &c) in selected.iter().zip(gt.dense()) {
        if s {
            chosen += 1;
            if c {
                hits += 1;
            }
        }
    }
    let precision = (chosen > 0).then(|| hits as f64 / chosen as f64);
    Ok((precision, hits as f64 / gt.len() as f64))
}

fn check_gt_shape<S: Scalar>(m: &DenseMask<S>, gt: &GroundTruth) -> Result<()> {
    if m.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            expected: gt.shape(),
            actual: m.shape(),
        });
    }
    Ok(())
}

/// Areas under the precision and recall curves, approximated by averaging
/// over `cfg.alpha_grid`. Thresholds that select nothing are left out of the
/// precision average.
pub fn aup_aur<S: Scalar>(m: &DenseMask<S>, gt: &GroundTruth, cfg: &MetricsConfig) -> Result<(f64, f64)> {
    check_gt_shape(m, gt)?;
    let (mut p_sum, mut p_n, mut r_sum) = (0.0, 0usize, 0.0);
    for &alpha in &cfg.alpha_grid {
        let (p, r) = precision_recall(m, gt, alpha)?;
        if let Some(p) = p {
            p_sum += p;
            p_n += 1;
        }
        r_sum += r;
    }
    if p_n == 0 {
        return Err(Error::Undefined(
            "precision is undefined at every threshold (mask selects nothing)".into(),
        ));
    }
    Ok((p_sum / p_n as f64, r_sum / cfg.alpha_grid.len() as f64))
}

/// Number of adjacent-in-time pairs differing by more than the threshold.
pub fn discreteness<S: Scalar>(m: &DenseMask<S>, cfg: &MetricsConfig) -> usize {
    let beta = S::from_f64_lossy(cfg.discreteness_threshold);
    m.rows()
        .map(|row| row.windows(2).filter(|w| (w[0] - w[1]).abs() > beta).count())
        .sum()
}

/// Summed binary entropy of the entries, with `0 · ln 0 = 0`.
pub fn entropy<S: Scalar>(m: &DenseMask<S>) -> f64 {
    let h = |p: f64| if p <= 0.0 { 0.0 } else { p * p.ln() };
    let total: f64 = m
        .values()
        .iter()
        .map(|v| {
            let p = v.as_f64();
            h(p) + h(1.0 - p)
        })
        .sum();
    if total == 0.0 {
        0.0
    } else {
        -total
    }
}

/// Number of entries kept by [`top_fraction`].
pub fn top_count(q: f64, n: usize) -> usize {
    // shave relative rounding noise so 0.1 * 2500 keeps exactly 250
    let raw = (q * n as f64 * (1.0 - 1e-12)).ceil();
    (raw as usize).clamp(1, n)
}

/// Sets the `⌈q·D·T⌉` largest entries to one and the rest to zero. Ties go to
/// the lowest feature-major index.
pub fn top_fraction<S: Scalar>(m: &DenseMask<S>, q: f64) -> Result<DenseMask<S>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("top fraction {q} not in (0, 1]")));
    }
    let n = m.values().len();
    let keep = top_count(q, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        m.values()[b]
            .partial_cmp(&m.values()[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut bits = vec![false; n];
    for &i in &order[..keep] {
        bits[i] = true;
    }
    DenseMask::from_binary(m.d_features(), m.t_steps(), &bits)
}

/// Mean cross-entropy of masked predictions against the class predicted on
/// the unmasked input.
pub fn dataset_cross_entropy<S, M>(
    model: &M,
    samples: &[(TimeSeries<S>, DenseMask<S>)],
    spec: &PerturbationSpec,
) -> Result<f64>
where
    S: Scalar,
    M: BlackBoxModel<S> + ?Sized,
{
    if model.task() != TaskKind::Classification {
        return Err(Error::NotProbability(
            "dataset cross-entropy needs a classification model".into(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::Undefined("dataset is empty".into()));
    }
    let mut total = 0.0;
    for (x, m) in samples {
        let y = checked_predict(model, x)?;
        let class = y.argmax().ok_or_else(|| Error::NotProbability("empty output".into()))?;
        let y_hat = checked_predict(model, &apply_mask(x, m, spec)?)?;
        if y_hat.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: y_hat.len(),
            });
        }
        total -= y_hat.values()[class].as_f64().max(DEFAULT_LOG_CLAMP).ln();
    }
    let ce = total / samples.len() as f64;
    Ok(if ce == 0.0 { 0.0 } else { ce })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;
    use proptest::prelude::*;

    fn mask(rows: &[&[f64]]) -> DenseMask<f64> {
        DenseMask::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn binarize_uses_closed_threshold() {
        assert_eq!(binarize(&mask(&[&[0.3, 0.7]]), 0.5), vec![false, true]);
        assert_eq!(binarize(&mask(&[&[0.5]]), 0.5), vec![true]);
        let b = mask(&[&[0.0, 1.0, 1.0]]);
        for alpha in [0.01, 0.5, 0.99] {
            assert_eq!(binarize(&b, alpha), vec![false, true, true]);
        }
    }

    #[test]
    fn precision_recall_examples() {
        let gt = GroundTruth::new(2, 3, [(0, 0), (0, 1), (0, 2), (1, 0)]).unwrap();
        let exact: DenseMask<f64> = gt.to_mask();
        assert_eq!(precision_recall(&exact, &gt, 0.5).unwrap(), (Some(1.0), 1.0));
        let half = mask(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(precision_recall(&half, &gt, 0.5).unwrap(), (Some(1.0), 0.5));
        let disjoint = mask(&[&[0.0, 0.0, 0.0], &[0.0, 1.0, 1.0]]);
        assert_eq!(precision_recall(&disjoint, &gt, 0.5).unwrap(), (Some(0.0), 0.0));
        let nothing = DenseMask::<f64>::zeros(2, 3).unwrap();
        assert_eq!(precision_recall(&nothing, &gt, 0.5).unwrap(), (None, 0.0));
    }

    #[test]
    fn areas_for_binary_masks() {
        let cfg = MetricsConfig::default();
        let gt = GroundTruth::new(2, 3, [(0, 0), (0, 1), (0, 2), (1, 0)]).unwrap();
        assert_eq!(aup_aur(&gt.to_mask::<f64>(), &gt, &cfg).unwrap(), (1.0, 1.0));
        let half = mask(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(aup_aur(&half, &gt, &cfg).unwrap(), (1.0, 0.5));
        let (aup, aur) = aup_aur(&DenseMask::<f64>::ones(2, 3).unwrap(), &gt, &cfg).unwrap();
        assert!((aup - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(aur, 1.0);
        assert!(matches!(
            aup_aur(&DenseMask::<f64>::zeros(2, 3).unwrap(), &gt, &cfg),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn discreteness_counts_transitions() {
        let cfg = MetricsConfig::default();
        assert_eq!(discreteness(&DenseMask::<f64>::filled(3, 5, 0.4).unwrap(), &cfg), 0);
        assert_eq!(discreteness(&mask(&[&[0.0, 1.0, 1.0, 1.0, 0.0]]), &cfg), 2);
        assert_eq!(discreteness(&mask(&[&[0.0, 0.05, 0.1, 0.3]]), &cfg), 1);
    }

    #[test]
    fn entropy_values() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(entropy(&mask(&[&[0.0, 1.0], &[1.0, 1.0]])), 0.0);
        assert!((entropy(&mask(&[&[0.5]])) - ln2).abs() < 1e-15);
        let n = 12;
        let half = DenseMask::<f64>::filled(3, 4, 0.5).unwrap();
        assert!((entropy(&half) - n as f64 * ln2).abs() < 1e-12);
    }

    #[test]
    fn top_fraction_examples() {
        let m = mask(&[&[3.0 / 4.0, 1.0 / 4.0], &[2.0 / 4.0, 1.0]]);
        assert_eq!(top_fraction(&m, 0.5).unwrap(), mask(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(top_fraction(&m, 1.0).unwrap(), DenseMask::ones(2, 2).unwrap());
        assert_eq!(top_fraction(&m, 0.25).unwrap(), mask(&[&[0.0, 0.0], &[0.0, 1.0]]));
        // ties resolve to the lowest index
        let flat = DenseMask::<f64>::filled(1, 4, 0.3).unwrap();
        assert_eq!(top_fraction(&flat, 0.5).unwrap(), mask(&[&[1.0, 1.0, 0.0, 0.0]]));
        assert!(top_fraction(&m, 0.0).is_err());
        assert_eq!(top_count(0.1, 2500), 250);
        assert_eq!(top_count(0.3, 10), 3);
        assert_eq!(top_count(0.01, 10), 1);
    }

    #[test]
    fn ground_truth_validation() {
        assert!(GroundTruth::new(2, 2, []).is_err());
        assert!(GroundTruth::new(2, 2, [(2, 0)]).is_err());
        let gt = GroundTruth::new(2, 2, [(1, 1), (1, 1), (0, 1)]).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(GroundTruth::from_dense(2, 2, gt.dense()).unwrap(), gt);
    }

    #[test]
    fn metrics_config_validation() {
        MetricsConfig::default().validate().unwrap();
        let bad = MetricsConfig { alpha_grid: vec![0.5, 0.2], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MetricsConfig { discreteness_threshold: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn classifier() -> impl BlackBoxModel<f64> {
        FnModel::new(TaskKind::Classification, |x: &TimeSeries<f64>| {
            let s = x.get(0, 0);
            if s > 0.5 { vec![0.9, 0.1] } else { vec![0.5, 0.5] }
        })
    }

    #[test]
    fn cross_entropy_examples() {
        let model = classifier();
        let x = TimeSeries::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let cover = mask(&[&[1.0, 0.0]]);
        let spec = PerturbationSpec::zero();
        let one = dataset_cross_entropy(&model, &[(x.clone(), cover.clone())], &spec).unwrap();
        assert!((one - 2f64.ln()).abs() < 1e-12);
        let many = vec![(x.clone(), cover); 5];
        assert!((dataset_cross_entropy(&model, &many, &spec).unwrap() - one).abs() < 1e-12);
        let untouched = vec![(x, DenseMask::zeros(1, 2).unwrap())];
        let ce = dataset_cross_entropy(&model, &untouched, &spec).unwrap();
        assert!((ce + 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_regression() {
        let model = FnModel::new(TaskKind::Regression, |_: &TimeSeries<f64>| vec![1.0]);
        let x = TimeSeries::from_rows(&[vec![1.0]]).unwrap();
        let m = DenseMask::zeros(1, 1).unwrap();
        assert!(dataset_cross_entropy(&model, &[(x, m)], &PerturbationSpec::zero()).is_err());
    }

    proptest! {
        #[test]
        fn binary_masks_have_flat_curves(bits in prop::collection::vec(any::<bool>(), 12),
                                         truth in prop::collection::vec(any::<bool>(), 12)) {
            prop_assume!(truth.iter().any(|&b| b) && bits.iter().any(|&b| b));
            let m = DenseMask::<f64>::from_binary(3, 4, &bits).unwrap();
            let gt = GroundTruth::from_dense(3, 4, &truth).unwrap();
            prop_assert_eq!(entropy(&m), 0.0);
            let full = aup_aur(&m, &gt, &MetricsConfig::default()).unwrap();
            let coarse = MetricsConfig { alpha_grid: vec![0.2, 0.9], ..Default::default() };
            let c = aup_aur(&m, &gt, &coarse).unwrap();
            prop_assert!((c.0 - full.0).abs() < 1e-12 && (c.1 - full.1).abs() < 1e-12);
        }

        #[test]
        fn top_fraction_popcount_exact(vals in prop::collection::vec(0.0f64..=1.0, 20), q in 0.01f64..=1.0) {
            let m = DenseMask::new(4, 5, vals).unwrap();
            let top = top_fraction(&m, q).unwrap();
            prop_assert_eq!(top.support_size(), top_count(q, 20));
            prop_assert!(top.is_binary());
        }

        #[test]
        fn recall_monotone_in_coverage(base in prop::collection::vec(any::<bool>(), 12),
                                       extra in prop::collection::vec(any::<bool>(), 12),
                                       truth in prop::collection::vec(any::<bool>(), 12)) {
            prop_assume!(truth.iter().any(|&b| b));
            let gt = GroundTruth::from_dense(3, 4, &truth).unwrap();
            let grown: Vec<bool> = base.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
            let small = DenseMask::<f64>::from_binary(3, 4, &base).unwrap();
            let large = DenseMask::<f64>::from_binary(3, 4, &grown).unwrap();
            for alpha in [0.1, 0.5, 0.9] {
                let (_, r_small) = precision_recall(&small, &gt, alpha).unwrap();
                let (p_large, r_large) = precision_recall(&large, &gt, alpha).unwrap();
                prop_assert!(r_large >= r_small);
                if let Some(p) = p_large { prop_assert!((0.0..=1.0).contains(&p)); }
            }
        }

        #[test]
        fn entropy_zero_iff_binary(vals in prop::collection::vec(0.0f64..=1.0, 6)) {
            let m = DenseMask::new(2, 3, vals).unwrap();
            let e = entropy(&m);
            prop_assert_eq!(e == 0.0, m.is_binary());
            prop_assert!(e <= 6.0 * std::f64::consts::LN_2 + 1e-12);
        }
    }
}
