//! Stage four: a logistic-regression gate over the consistency score, the
//! network score and a few candidate-shape features.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::network::NetworkScore;
use crate::parser::ExtractionCandidate;
use crate::types::{bce, sigmoid, RelationKind};

pub const FEATURE_NAMES: [&str; 5] = ["s", "s_tilde", "s_missing", "pair_distance", "kind_is_rel"];
pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// How `s` becomes a feature, frozen at training time: an optional log
/// compression `-ln(1 - s/log_scale)` (skipped when `log_scale` is 0),
/// then standardization by the mean and standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreScaling {
    pub log_scale: f64,
    pub mean: f64,
    pub std: f64,
}

impl Default for ScoreScaling {
    fn default() -> Self {
        ScoreScaling { log_scale: 0.0, mean: 0.0, std: 1.0 }
    }
}

impl ScoreScaling {
    /// Fit on the scores that are present. A constant (or empty) sample
    /// gets unit scale.
    pub fn fit<'a>(scores: impl IntoIterator<Item = &'a Option<f64>>, log_scale: f64) -> Self {
        let unscaled = ScoreScaling { log_scale, ..ScoreScaling::default() };
        let xs: Vec<f64> = scores.into_iter().flatten().map(|s| unscaled.compress(*s)).collect();
        if xs.is_empty() {
            return unscaled;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        ScoreScaling { log_scale, mean, std }
    }

    /// Monotone in `s`; maps 0 to 0.
    pub fn compress(&self, s: f64) -> f64 {
        if self.log_scale > 0.0 {
            -((-s).max(0.0) / self.log_scale).ln_1p()
        } else {
            s
        }
    }

    pub fn apply(&self, s: f64) -> f64 {
        (self.compress(s) - self.mean) / self.std
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionFeatures {
    /// Standardized consistency score; 0 when missing.
    pub s: f64,
    pub s_tilde: f64,
    pub s_missing: f64,
    /// Symbol/value gap divided by the pairing window.
    pub pair_distance: f64,
    pub kind_is_rel: f64,
}

impl FusionFeatures {
    pub fn to_vec(&self) -> [f64; NUM_FEATURES] {
        [self.s, self.s_tilde, self.s_missing, self.pair_distance, self.kind_is_rel]
    }
}

pub fn fuse_features(
    candidate: &ExtractionCandidate,
    s: Option<f64>,
    net: &NetworkScore,
    scaling: &ScoreScaling,
    pair_window: usize,
) -> FusionFeatures {
    let (s_feat, missing) = match s {
        Some(v) if v.is_finite() => (scaling.apply(v), 0.0),
        _ => (0.0, 1.0),
    };
    FusionFeatures {
        s: s_feat,
        s_tilde: net.s_tilde,
        s_missing: missing,
        pair_distance: candidate.pair_gap() as f64 / pair_window.max(1) as f64,
        kind_is_rel: f64::from(u8::from(candidate.kind == RelationKind::TickRel)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub s_scaling: ScoreScaling,
    pub pair_window: usize,
}

impl FusionParams {
    pub fn new(weights: Vec<f64>, bias: f64, threshold: f64) -> Result<Self> {
        let p = FusionParams {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights,
            bias,
            threshold,
            s_scaling: ScoreScaling::default(),
            pair_window: crate::parser::DEFAULT_MAX_PAIR_DISTANCE,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != NUM_FEATURES {
            return Err(Error::dim("fusion weights", NUM_FEATURES, self.weights.len()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::InvalidConfig("non-finite fusion parameter".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: FusionParams = io::read_json(path)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn features(&self, candidate: &ExtractionCandidate, s: Option<f64>, net: &NetworkScore) -> FusionFeatures {
        fuse_features(candidate, s, net, &self.s_scaling, self.pair_window)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionDecision {
    pub decision: Decision,
    pub p: f64,
}

impl FusionDecision {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
}

/// Accept iff `sigmoid(w.x + b) > threshold`; ties are rejected.
pub fn classify(params: &FusionParams, feats: &FusionFeatures) -> FusionDecision {
    let x = feats.to_vec();
    let z = params.bias + params.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    let p = sigmoid(z);
    FusionDecision {
        decision: if p > params.threshold { Decision::Accept } else { Decision::Reject },
        p,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionFit {
    pub params: FusionParams,
    pub final_loss: f64,
}

/// Mean BCE and its gradient `(d/dw, d/db)` at `(w, b)`.
pub fn fusion_loss_and_grad(rows: &[(FusionFeatures, u8)], w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (f, y) in rows {
        let x = f.to_vec();
        let z = b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
        let p = sigmoid(z);
        let y = f64::from(*y);
        loss += bce(p, y);
        let d = p - y;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += d * xi;
        }
        gb += d;
    }
    let n = rows.len().max(1) as f64;
    gw.iter_mut().for_each(|g| *g /= n);
    (loss / n, gw, gb / n)
}

/// Full-batch gradient descent from zero weights.
pub fn train_fusion(
    rows: &[(FusionFeatures, u8)],
    scaling: ScoreScaling,
    pair_window: usize,
    learning_rate: f64,
    epochs: usize,
    threshold: f64,
) -> Result<FusionFit> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut w = vec![0.0; NUM_FEATURES];
    let mut b = 0.0;
    for _ in 0..epochs {
        let (_, gw, gb) = fusion_loss_and_grad(rows, &w, b);
        for (wi, g) in w.iter_mut().zip(gw) {
            *wi -= learning_rate * g;
        }
        b -= learning_rate * gb;
    }
    let (final_loss, _, _) = fusion_loss_and_grad(rows, &w, b);
    let mut params = FusionParams::new(w, b, threshold)?;
    params.s_scaling = scaling;
    params.pair_window = pair_window;
    Ok(FusionFit { params, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Span;

    fn cand(kind: RelationKind, gap: usize) -> ExtractionCandidate {
        ExtractionCandidate {
            doc_id: "d".into(),
            timestamp: 0,
            kind,
            symbol: "S".into(),
            value: 1.0,
            symbol_span: Span::new(0, 5),
            value_span: Span::new(5 + gap, 8 + gap),
            section_span: Span::new(0, 8 + gap),
            aux: Default::default(),
        }
    }

    fn net(s_tilde: f64) -> NetworkScore {
        NetworkScore::from_probability(sigmoid(s_tilde))
    }

    #[test]
    fn missing_score_is_imputed() {
        let sc = ScoreScaling { log_scale: 0.01, mean: -3.0, std: 2.0 };
        let f = fuse_features(&cand(RelationKind::TickAbs, 0), None, &net(0.0), &sc, 160);
        assert_eq!(f.s, 0.0);
        assert_eq!(f.s_missing, 1.0);
    }

    #[test]
    fn zero_case_and_distance() {
        let f = fuse_features(&cand(RelationKind::TickAbs, 0), Some(0.0), &net(0.0), &ScoreScaling::fit(&[Some(-1.0), Some(1.0)], 0.0), 160);
        assert_eq!(f.to_vec(), [0.0; 5]);
        let f = fuse_features(&cand(RelationKind::TickRel, 80), Some(0.0), &net(0.0), &ScoreScaling::default(), 160);
        assert_eq!(f.pair_distance, 0.5);
        assert_eq!(f.kind_is_rel, 1.0);
    }

    #[test]
    fn log_compression() {
        let sc = ScoreScaling::fit(&[Some(0.0), None, Some(-0.01 * (1f64.exp() - 1.0))], 0.01);
        assert_eq!(sc.compress(0.0), 0.0);
        assert!((sc.compress(-0.01 * (2f64.exp() - 1.0)) + 2.0).abs() < 1e-12);
        assert!((sc.mean + 0.5).abs() < 1e-12 && (sc.std - 0.5).abs() < 1e-12);
        assert_eq!(sc.apply(0.0), 1.0);
        let mut last = f64::INFINITY;
        for s in [0.0, -1e-4, -2.5e-3, -0.1, -81.0, -1e6] {
            let x = sc.apply(s);
            assert!(x < last);
            last = x;
        }
    }

    #[test]
    fn tie_is_rejected() {
        let p = FusionParams::new(vec![0.0; 5], 0.0, 0.5).unwrap();
        let d = classify(&p, &FusionFeatures { s: 1.0, s_tilde: 2.0, s_missing: 0.0, pair_distance: 0.1, kind_is_rel: 1.0 });
        assert_eq!(d.p, 0.5);
        assert_eq!(d.decision, Decision::Reject);
    }

    #[test]
    fn huge_bias_accepts_everything() {
        let p = FusionParams::new(vec![1.0, 1.0, -1.0, -1.0, 1.0], 1e6, 0.5).unwrap();
        for s in [-50.0, 0.0, 50.0] {
            let f = FusionFeatures { s, s_tilde: s, s_missing: 1.0, pair_distance: 1.0, kind_is_rel: 0.0 };
            assert!(classify(&p, &f).accepted());
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FusionParams::new(vec![0.0; 4], 0.0, 0.5).is_err());
        assert!(FusionParams::new(vec![0.0; 5], 0.0, 1.0).is_err());
        assert!(FusionParams::new(vec![0.0; 5], 0.0, 0.0).is_err());
    }

    fn row(s_tilde: f64, y: u8) -> (FusionFeatures, u8) {
        (FusionFeatures { s: 0.0, s_tilde, s_missing: 0.0, pair_distance: 0.0, kind_is_rel: 0.0 }, y)
    }

    #[test]
    fn separable_one_dimensional_data() {
        let rows: Vec<_> = (-10..=10)
            .filter(|i| *i != 0)
            .map(|i| row(i as f64 * 0.3, u8::from(i > 0)))
            .collect();
        let fit = train_fusion(&rows, ScoreScaling::default(), 160, 1.0, 2000, 0.5).unwrap();
        let correct = rows
            .iter()
            .filter(|(f, y)| classify(&fit.params, f).accepted() == (*y == 1))
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn constant_positive_labels_accept_everything() {
        let rows: Vec<_> = (0..20).map(|i| row(i as f64 - 10.0, 1)).collect();
        let fit = train_fusion(&rows, ScoreScaling::default(), 160, 0.5, 500, 0.5).unwrap();
        assert!(rows.iter().all(|(f, _)| classify(&fit.params, f).accepted()));
        assert!(matches!(
            train_fusion(&[], ScoreScaling::default(), 160, 0.5, 10, 0.5),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn bias_gradient_is_mean_residual() {
        let rows = vec![row(0.5, 1), row(-1.0, 0), row(2.0, 0), row(0.0, 1)];
        let w = vec![0.1, 0.7, 0.0, 0.0, 0.0];
        let b = -0.3;
        let (_, _, gb) = fusion_loss_and_grad(&rows, &w, b);
        let mean_resid: f64 = rows
            .iter()
            .map(|(f, y)| sigmoid(b + 0.1 * f.s + 0.7 * f.s_tilde) - f64::from(*y))
            .sum::<f64>()
            / rows.len() as f64;
        assert!((gb - mean_resid).abs() < 1e-12);
        // and it agrees with a central difference of the loss
        let h = 1e-6;
        let lp = fusion_loss_and_grad(&rows, &w, b + h).0;
        let lm = fusion_loss_and_grad(&rows, &w, b - h).0;
        assert!((gb - (lp - lm) / (2.0 * h)).abs() < 1e-8);
    }

    #[test]
    fn positive_scaling_preserves_decisions() {
        let base = FusionParams::new(vec![0.4, 1.3, -2.0, -0.5, 0.2], -0.1, 0.5).unwrap();
        let mut scaled = base.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= 3.7);
        scaled.bias *= 3.7;
        for i in 0..50 {
            let t = i as f64 * 0.37 - 9.0;
            let f = FusionFeatures { s: t.sin() * 3.0, s_tilde: t, s_missing: f64::from(i % 3 == 0), pair_distance: (i % 7) as f64 / 7.0, kind_is_rel: f64::from(i % 2 == 0) };
            assert_eq!(classify(&base, &f).decision, classify(&scaled, &f).decision);
        }
    }
}
