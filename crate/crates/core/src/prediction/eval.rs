use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (true, true) => self.tp += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        (self.tn + self.tp) as f64 / self.total() as f64
    }
}

/// Scores `predict` on labelled items.
pub fn evaluate_predictor<T>(
    items: &[T],
    predict: impl Fn(&T) -> bool,
    label: impl Fn(&T) -> bool,
) -> Result<ConfusionMatrix> {
    if items.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut m = ConfusionMatrix::default();
    for it in items {
        m.record(predict(it), label(it));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_matrix_accuracy() {
        let m = ConfusionMatrix {
            tn: 2469,
            fp: 88,
            fn_: 205,
            tp: 1238,
        };
        assert_eq!(m.total(), 4000);
        assert!((m.accuracy() - 0.926).abs() < 1e-3);
    }

    #[test]
    fn main_road_matrix_accuracy() {
        let m = ConfusionMatrix {
            tn: 3237,
            fp: 57,
            fn_: 181,
            tp: 525,
        };
        assert!((m.accuracy() - 0.941).abs() < 1e-3);
    }

    #[test]
    fn perfect_predictor() {
        let items = [true, false, false, true, true];
        let m = evaluate_predictor(&items, |x| *x, |x| *x).unwrap();
        assert_eq!((m.fp, m.fn_), (0, 0));
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn empty_set_is_an_error() {
        let items: [bool; 0] = [];
        assert!(evaluate_predictor(&items, |x| *x, |x| *x).is_err());
    }
}
