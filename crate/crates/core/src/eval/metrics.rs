use serde::{Deserialize, Serialize};

use crate::util::mean_std;

/// Binary confusion counts, `counts[actual][predicted]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[usize; 2]; 2],
}

impl Confusion {
    pub fn from_predictions(truth: &[usize], pred: &[usize]) -> Self {
        let mut counts = [[0; 2]; 2];
        for (&t, &p) in truth.iter().zip(pred) {
            counts[t.min(1)][p.min(1)] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &Confusion) {
        for a in 0..2 {
            for p in 0..2 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    /// Zero when the class is never predicted.
    pub fn precision(&self, class: usize) -> f64 {
        let predicted = self.counts[0][class] + self.counts[1][class];
        ratio(self.counts[class][class], predicted)
    }

    pub fn recall(&self, class: usize) -> f64 {
        let actual = self.counts[class][0] + self.counts[class][1];
        ratio(self.counts[class][class], actual)
    }

    pub fn f1(&self, class: usize) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn macro_precision(&self) -> f64 {
        (self.precision(0) + self.precision(1)) / 2.0
    }

    pub fn macro_recall(&self) -> f64 {
        (self.recall(0) + self.recall(1)) / 2.0
    }

    pub fn macro_f1(&self) -> f64 {
        (self.f1(0) + self.f1(1)) / 2.0
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.counts[0][0] + self.counts[1][1], self.total())
    }

    /// Pooled over both classes; equals accuracy for a binary task.
    pub fn micro_recall(&self) -> f64 {
        let tp = self.counts[0][0] + self.counts[1][1];
        let fn_ = self.counts[0][1] + self.counts[1][0];
        ratio(tp, tp + fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, std) = mean_std(xs);
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prediction_on_balanced_data() {
        let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let c = Confusion::from_predictions(&truth, &[1; 100]);
        // Class 1: precision 1/2, recall 1, F1 2/3. Class 0: never predicted.
        assert!((c.macro_f1() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn micro_recall_is_accuracy() {
        let c = Confusion::from_predictions(&[0, 0, 1, 1, 1], &[0, 1, 1, 0, 1]);
        assert_eq!(c.micro_recall(), c.accuracy());
        assert_eq!(c.accuracy(), 0.6);
    }

    #[test]
    fn display_two_decimals() {
        assert_eq!(MeanStd { mean: 0.976, std: 0.0149 }.to_string(), "0.98±0.01");
    }
}
