use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::label::Label;

/// Confusion counts and the ratios derived from them. A ratio whose
/// denominator is zero is `None` and serializes as `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(with = "ratio")]
    pub acc: Option<f64>,
    #[serde(with = "ratio")]
    pub recall: Option<f64>,
    #[serde(with = "ratio")]
    pub precision: Option<f64>,
    #[serde(with = "ratio")]
    pub f1: Option<f64>,
    #[serde(with = "ratio")]
    pub fpr: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Metrics {
            acc: ratio(tp + tn, tp + tn + fp + fn_),
            recall,
            precision,
            f1,
            fpr: ratio(fp, fp + tn),
            tp,
            fp,
            tn,
            fn_,
        }
    }

    /// Counts `(predicted, actual)` pairs with defective as the positive class.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Label, Label)>,
    {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (Label::Defective, Label::Defective) => tp += 1,
                (Label::Defective, Label::Clean) => fp += 1,
                (Label::Clean, Label::Clean) => tn += 1,
                (Label::Clean, Label::Defective) => fn_ += 1,
            }
        }
        Metrics::from_counts(tp, fp, tn, fn_)
    }

    /// Metrics of the union of two disjoint evaluation sets.
    pub fn merge(&self, other: &Metrics) -> Metrics {
        Metrics::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn_ + other.fn_,
        )
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

mod ratio {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("undefined"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Some(x)),
            Repr::Text(t) if t == "undefined" => Ok(None),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad ratio {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_one_nine_one() {
        let m = Metrics::from_counts(9, 1, 9, 1);
        for v in [m.acc, m.precision, m.recall, m.f1] {
            assert!((v.unwrap() - 0.9).abs() < 1e-15);
        }
        assert!((m.fpr.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let m = Metrics::from_counts(4, 0, 6, 0);
        assert_eq!(m.acc, Some(1.0));
        assert_eq!(m.fpr, Some(0.0));
    }

    #[test]
    fn empty_denominators_are_undefined() {
        let m = Metrics::from_counts(3, 0, 0, 1);
        assert_eq!(m.fpr, None);
        let json = serde_json::to_value(m).unwrap();
        assert_eq!(json["fpr"], "undefined");
        assert_eq!(json["fn"], 1);
        let back: Metrics = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn merge_adds_counts() {
        let a = Metrics::from_counts(1, 2, 3, 4);
        let b = Metrics::from_counts(5, 6, 7, 8);
        assert_eq!(a.merge(&b), Metrics::from_counts(6, 8, 10, 12));
    }
}
