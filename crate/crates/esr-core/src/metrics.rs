//! Classification metrics, predictive power recovery, and the statistics
//! used for reporting: medians, boxplot summaries, and the paired t-test.

use serde::{Deserialize, Serialize};

use crate::data::CaLabel;
use crate::error::{Error, Result};

// ── Confusion counts and F1 ──────────────────────────────────────────────────

/// One-vs-rest counts for a single class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Per-class one-vs-rest confusion counts over an evaluation set of size N.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub per_class: [ClassCounts; CaLabel::COUNT],
    pub n: usize,
}

/// Tallies one-vs-rest counts from argmax predictions. For each class `j`,
/// `TP + FP + TN + FN = N`.
pub fn confusion(preds: &[CaLabel], truths: &[CaLabel]) -> Result<ConfusionCounts> {
    if preds.len() != truths.len() {
        return Err(Error::Invalid(format!(
            "prediction/truth length mismatch: {} vs {}",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Invalid("empty evaluation set".into()));
    }
    let mut per_class = [ClassCounts::default(); CaLabel::COUNT];
    for (&p, &t) in preds.iter().zip(truths) {
        for (j, counts) in per_class.iter_mut().enumerate() {
            let predicted = p.index() == j;
            let actual = t.index() == j;
            match (actual, predicted) {
                (true, true) => counts.true_pos += 1,
                (false, true) => counts.false_pos += 1,
                (true, false) => counts.false_neg += 1,
                (false, false) => counts.true_neg += 1,
            }
        }
    }
    Ok(ConfusionCounts {
        per_class,
        n: preds.len(),
    })
}

/// Precision, recall, and F1 for one class; 0/0 ratios are defined as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class scores plus the overall (macro) F1: the unweighted mean of the
/// nine per-class F1s. The micro-averaged F1 is carried alongside since
/// "overall" is convention-dependent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: [ClassScores; CaLabel::COUNT],
    pub overall_f1: f64,
    pub micro_f1: f64,
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn f1_report(counts: &ConfusionCounts) -> F1Report {
    let mut per_class = [ClassScores::default(); CaLabel::COUNT];
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0usize, 0usize, 0usize);
    for (j, c) in counts.per_class.iter().enumerate() {
        let precision = ratio_or_zero(c.true_pos as f64, (c.true_pos + c.false_pos) as f64);
        let recall = ratio_or_zero(c.true_pos as f64, (c.true_pos + c.false_neg) as f64);
        let f1 = ratio_or_zero(2.0 * precision * recall, precision + recall);
        per_class[j] = ClassScores {
            precision,
            recall,
            f1,
        };
        tp_sum += c.true_pos;
        fp_sum += c.false_pos;
        fn_sum += c.false_neg;
    }
    let overall_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / CaLabel::COUNT as f64;
    let micro_p = ratio_or_zero(tp_sum as f64, (tp_sum + fp_sum) as f64);
    let micro_r = ratio_or_zero(tp_sum as f64, (tp_sum + fn_sum) as f64);
    let micro_f1 = ratio_or_zero(2.0 * micro_p * micro_r, micro_p + micro_r);
    F1Report {
        per_class,
        overall_f1,
        micro_f1,
    }
}

// ── Median ───────────────────────────────────────────────────────────────────

/// Middle element after sorting, or the mean of the two middle elements.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invalid("median of empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

// ── Predictive power recovery ────────────────────────────────────────────────

/// F1 inputs for PPR: high-frequency, low-frequency, and reconstructed.
/// No ordering is enforced between them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PprInputs {
    pub fh: f64,
    pub fl: f64,
    pub fr: f64,
}

impl PprInputs {
    pub fn new(fh: f64, fl: f64, fr: f64) -> Result<Self> {
        for (name, v) in [("FH", fh), ("FL", fl), ("FR", fr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { fh, fl, fr })
    }
}

/// `(FR - FL) / (FH - FL)`, or `Undefined` when the denominator is within
/// `eps` of zero (the ceiling and floor coincide, so the ratio blows up).
/// Negative values are legal but flagged anomalous.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ppr {
    Defined { value: f64, anomalous: bool },
    Undefined,
}

impl Ppr {
    pub fn value(&self) -> Option<f64> {
        match self {
            Ppr::Defined { value, .. } => Some(*value),
            Ppr::Undefined => None,
        }
    }

    pub fn is_anomalous(&self) -> bool {
        matches!(self, Ppr::Defined { anomalous: true, .. })
    }
}

pub fn ppr(inputs: &PprInputs, eps: f64) -> Result<Ppr> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let den = inputs.fh - inputs.fl;
    if den.abs() < eps {
        return Ok(Ppr::Undefined);
    }
    let value = (inputs.fr - inputs.fl) / den;
    Ok(Ppr::Defined {
        value,
        anomalous: value < 0.0,
    })
}

pub const PPR_DEFAULT_EPS: f64 = 1e-9;

// ── Paired t-test ────────────────────────────────────────────────────────────

/// Two-sided paired Student t-test result at significance level 0.05.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTestResult {
    /// May be infinite when the differences are constant and nonzero
    /// (`degenerate` is set and p is reported as 0).
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
    pub degenerate: bool,
}

/// Paired two-sided Student t on the differences `a - b`. All-zero
/// differences give `t = 0, p = 1`; zero spread with nonzero mean is
/// reported as an infinite-t degenerate case with `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "paired t-test needs equal lengths, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Invalid(format!("paired t-test needs n >= 2, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;

    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t: 0.0,
                df,
                p: 1.0,
                significant: false,
                degenerate: false,
            }
        } else {
            TTestResult {
                t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                df,
                p: 0.0,
                significant: true,
                degenerate: true,
            }
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let p = t_two_sided_p(t, df as f64);
    Ok(TTestResult {
        t,
        df,
        p,
        significant: p < 0.05,
        degenerate: false,
    })
}

/// Two-sided p-value of the Student t distribution:
/// `p = I_x(df/2, 1/2)` with `x = df / (df + t^2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    reg_inc_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Regularized incomplete beta function `I_x(a, b)` via the standard
/// continued-fraction expansion (modified Lentz), switched at the symmetry
/// point for convergence.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    assert!((0.0..=1.0).contains(&x), "x must lie in [0, 1], got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Log-gamma by the Lanczos approximation (g = 7, n = 9), accurate to
/// ~1e-13 over the arguments used here.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

// ── Boxplot statistics ───────────────────────────────────────────────────────

/// Quartiles, fences, and outliers per the 1.5·IQR rule. Quartiles use
/// linear interpolation at positions `p * (n - 1)` on the sorted list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Values strictly outside the fences, in ascending order.
    pub outliers: Vec<f64>,
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.len() < 2 {
        return Err(Error::Invalid(format!(
            "boxplot statistics need n >= 2, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] + (sorted[i + 1] - sorted[i]) * t
        } else {
            sorted[i]
        }
    };
    let q1 = quantile(0.25);
    let med = quantile(0.5);
    let q3 = quantile(0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lower_fence || v > upper_fence)
        .collect();
    Ok(BoxplotStats {
        q1,
        median: med,
        q3,
        iqr,
        lower_fence,
        upper_fence,
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg64;

    use CaLabel::{Af, Normal};

    #[test]
    fn perfect_predictions_have_no_errors() {
        let truths = vec![Normal, Af, Af, CaLabel::Ste];
        let counts = confusion(&truths, &truths).unwrap();
        for (j, c) in counts.per_class.iter().enumerate() {
            assert_eq!(c.false_pos, 0);
            assert_eq!(c.false_neg, 0);
            let support = truths.iter().filter(|t| t.index() == j).count();
            assert_eq!(c.true_pos, support);
        }
        let report = f1_report(&counts);
        assert_eq!(report.micro_f1, 1.0);
    }

    #[test]
    fn hand_counted_two_class_example() {
        // truths [A, A, B], preds [A, B, B] with A = Normal, B = AF.
        let truths = vec![Normal, Normal, Af];
        let preds = vec![Normal, Af, Af];
        let counts = confusion(&preds, &truths).unwrap();
        let a = counts.per_class[Normal.index()];
        assert_eq!((a.true_pos, a.false_neg, a.false_pos, a.true_neg), (1, 1, 0, 1));
        let b = counts.per_class[Af.index()];
        assert_eq!((b.true_pos, b.false_pos, b.false_neg, b.true_neg), (1, 1, 0, 1));
        for c in &counts.per_class {
            assert_eq!(c.total(), 3);
        }
    }

    #[test]
    fn confusion_rejects_mismatched_lengths() {
        assert!(confusion(&[Normal], &[Normal, Af]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn f1_hand_arithmetic() {
        let mut counts = ConfusionCounts {
            per_class: [ClassCounts::default(); 9],
            n: 4,
        };
        counts.per_class[0] = ClassCounts {
            true_pos: 2,
            false_pos: 1,
            false_neg: 1,
            true_neg: 0,
        };
        let report = f1_report(&counts);
        let s = report.per_class[0];
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_never_predicted_class_scores_zero() {
        let counts = ConfusionCounts {
            per_class: [ClassCounts {
                true_neg: 5,
                ..Default::default()
            }; 9],
            n: 5,
        };
        let report = f1_report(&counts);
        for s in &report.per_class {
            assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        }
        assert_eq!(report.overall_f1, 0.0);
    }

    /// Literal transcription of the one-vs-rest set definitions: counts
    /// each class by enumerating (prediction, truth) pairs.
    fn brute_force_report(preds: &[CaLabel], truths: &[CaLabel]) -> F1Report {
        let mut per_class = [ClassScores::default(); 9];
        let mut tp_all = 0usize;
        let mut fp_all = 0usize;
        let mut fn_all = 0usize;
        for j in 0..9 {
            let indicator = |l: CaLabel| usize::from(l.index() == j);
            let pairs: Vec<(usize, usize)> = truths
                .iter()
                .zip(preds)
                .map(|(&y, &f)| (indicator(y), indicator(f)))
                .collect();
            let tp = pairs.iter().filter(|&&(y, f)| y == 1 && f == 1).count();
            let fp = pairs.iter().filter(|&&(y, f)| y == 0 && f == 1).count();
            let fn_ = pairs.iter().filter(|&&(y, f)| y == 1 && f == 0).count();
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            per_class[j] = ClassScores {
                precision: p,
                recall: r,
                f1,
            };
            tp_all += tp;
            fp_all += fp;
            fn_all += fn_;
        }
        let overall_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / 9.0;
        let mp = if tp_all + fp_all == 0 { 0.0 } else { tp_all as f64 / (tp_all + fp_all) as f64 };
        let mr = if tp_all + fn_all == 0 { 0.0 } else { tp_all as f64 / (tp_all + fn_all) as f64 };
        let micro_f1 = if mp + mr == 0.0 { 0.0 } else { 2.0 * mp * mr / (mp + mr) };
        F1Report {
            per_class,
            overall_f1,
            micro_f1,
        }
    }

    #[test]
    fn report_matches_brute_force_oracle() {
        let mut rng = Lcg64::new(314);
        for _ in 0..100 {
            let n = 1 + rng.next_below(20) as usize;
            let preds: Vec<CaLabel> = (0..n)
                .map(|_| CaLabel::from_index(rng.next_below(9) as usize).unwrap())
                .collect();
            let truths: Vec<CaLabel> = (0..n)
                .map(|_| CaLabel::from_index(rng.next_below(9) as usize).unwrap())
                .collect();
            let report = f1_report(&confusion(&preds, &truths).unwrap());
            let oracle = brute_force_report(&preds, &truths);
            assert_eq!(report, oracle);
            // Partition identity for every class.
            let counts = confusion(&preds, &truths).unwrap();
            for c in &counts.per_class {
                assert_eq!(c.total(), n);
            }
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn ppr_endpoint_cases() {
        let eps = PPR_DEFAULT_EPS;
        let at = |fh, fl, fr| ppr(&PprInputs::new(fh, fl, fr).unwrap(), eps).unwrap();
        assert_eq!(at(0.8, 0.5, 0.8).value(), Some(1.0));
        assert_eq!(at(0.8, 0.5, 0.5).value(), Some(0.0));
    }

    #[test]
    fn ppr_lead_v5_spot_value() {
        let inputs = PprInputs::new(0.76, 0.62, 0.70).unwrap();
        let value = ppr(&inputs, PPR_DEFAULT_EPS).unwrap().value().unwrap();
        assert!((value - 0.5714285714285711).abs() < 1e-4);
    }

    #[test]
    fn ppr_degenerate_denominator_is_undefined() {
        let inputs = PprInputs::new(0.62, 0.62, 0.70).unwrap();
        assert_eq!(ppr(&inputs, PPR_DEFAULT_EPS).unwrap(), Ppr::Undefined);
        let nearly = PprInputs::new(0.62, 0.62 + 1e-12, 0.70).unwrap();
        assert_eq!(ppr(&nearly, PPR_DEFAULT_EPS).unwrap(), Ppr::Undefined);
    }

    #[test]
    fn ppr_flags_negative_values_as_anomalous() {
        let inputs = PprInputs::new(0.8, 0.5, 0.4).unwrap();
        let p = ppr(&inputs, PPR_DEFAULT_EPS).unwrap();
        assert!(p.is_anomalous());
        assert!(p.value().unwrap() < 0.0);
        assert!(PprInputs::new(1.2, 0.5, 0.4).is_err());
    }

    #[test]
    fn ppr_invariant_under_common_affine_rescaling() {
        let mut rng = Lcg64::new(21);
        for _ in 0..200 {
            let fh = rng.uniform(0.3, 1.0);
            let fl = rng.uniform(0.0, fh - 0.05);
            let fr = rng.uniform(0.0, 1.0);
            let scale = rng.uniform(0.1, 0.9);
            let shift = rng.uniform(0.0, 1.0 - scale);
            let base = ppr(&PprInputs::new(fh, fl, fr).unwrap(), PPR_DEFAULT_EPS).unwrap();
            let mapped = ppr(
                &PprInputs::new(scale * fh + shift, scale * fl + shift, scale * fr + shift)
                    .unwrap(),
                PPR_DEFAULT_EPS,
            )
            .unwrap();
            let (a, b) = (base.value().unwrap(), mapped.value().unwrap());
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn t_test_worked_example() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 1.0).abs() < 1e-12, "t = {}", r.t);
        assert_eq!(r.df, 4);
        assert!((r.p - 0.373900966300059).abs() < 1e-3, "p = {}", r.p);
        assert!(!r.significant);
        assert!(!r.degenerate);
    }

    #[test]
    fn t_test_identical_samples() {
        let a = [0.4, 0.6, 0.7];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn t_test_constant_nonzero_differences_degenerate() {
        let a = [2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn t_test_is_antisymmetric() {
        let mut rng = Lcg64::new(77);
        for _ in 0..50 {
            let n = 2 + rng.next_below(10) as usize;
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            if !ab.degenerate {
                assert!((ab.t + ba.t).abs() < 1e-12);
                assert!((ab.p - ba.p).abs() < 1e-12);
            }
        }
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn t_cdf_matches_reference_values() {
        // Frozen from an independent computation of the Student t CDF.
        let cases = [
            (1.0, 4.0, 0.373900966300059),
            (2.5, 9.0, 0.033861827682985846),
            (0.5, 1.0, 0.7048327646991335),
            (3.0, 2.0, 0.095465966266709),
            (1.8, 9.0, 0.1053906715864088),
        ];
        for (t, df, expect) in cases {
            let p = t_two_sided_p(t, df);
            assert!((p - expect).abs() < 1e-9, "t={t} df={df}: {p} vs {expect}");
        }
    }

    #[test]
    fn t_cdf_matches_quadrature_oracle() {
        // Independent route: integrate the t density numerically (Simpson)
        // and compare the two-sided tail mass.
        let density = |x: f64, df: f64| {
            let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
                / (df * std::f64::consts::PI).sqrt();
            c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0)
        };
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                acc += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        for (t, df) in [(1.0, 4.0), (2.0, 7.0), (0.3, 3.0), (2.5, 9.0)] {
            let central = simpson(&|x| density(x, df), -t, t, 20_000);
            let p_expected = 1.0 - central;
            let p = t_two_sided_p(t, df);
            assert!((p - p_expected).abs() < 1e-8, "t={t} df={df}: {p} vs {p_expected}");
        }
    }

    #[test]
    fn boxplot_one_through_nine() {
        let values: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let s = boxplot_stats(&values).unwrap();
        assert_eq!(s.q1, 3.0);
        assert_eq!(s.median, 5.0);
        assert_eq!(s.q3, 7.0);
        assert_eq!(s.iqr, 4.0);
        assert_eq!(s.lower_fence, -3.0);
        assert_eq!(s.upper_fence, 13.0);
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn boxplot_flags_extreme_outlier() {
        let s = boxplot_stats(&[1.0, 1.0, 1.0, 1.0, 100.0]).unwrap();
        assert_eq!(s.q1, 1.0);
        assert_eq!(s.q3, 1.0);
        assert_eq!(s.iqr, 0.0);
        assert_eq!((s.lower_fence, s.upper_fence), (1.0, 1.0));
        assert_eq!(s.outliers, vec![100.0]);
    }

    #[test]
    fn boxplot_all_equal_has_no_outliers() {
        let s = boxplot_stats(&[2.0; 6]).unwrap();
        assert_eq!(s.iqr, 0.0);
        assert!(s.outliers.is_empty());
        assert!(boxplot_stats(&[1.0]).is_err());
    }

    #[test]
    fn boxplot_ignores_input_order() {
        let mut rng = Lcg64::new(8);
        for _ in 0..30 {
            let n = 2 + rng.next_below(15) as usize;
            let values: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let base = boxplot_stats(&values).unwrap();
            let mut shuffled = values.clone();
            rng.shuffle(&mut shuffled);
            assert_eq!(boxplot_stats(&shuffled).unwrap(), base);
        }
    }
}
