use serde::{Deserialize, Serialize};

/// Square confusion matrix over 1-based classes; rows are true classes,
/// columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        assert!(truth >= 1 && truth <= self.classes && predicted >= 1 && predicted <= self.classes);
        self.counts[(truth - 1) * self.classes + (predicted - 1)] += 1;
    }

    pub fn at(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[(truth - 1) * self.classes + (predicted - 1)]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[(truth - 1) * self.classes..truth * self.classes].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (1..=self.classes).map(|c| self.at(c, c)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let mut m = ConfusionMatrix::new(3);
        for c in 1..=3 {
            for _ in 0..4 {
                m.record(c, c);
            }
        }
        assert_eq!(m.trace(), 12);
        assert_eq!(m.total(), 12);
        assert_eq!(m.accuracy(), 1.0);
        for c in 1..=3 {
            assert_eq!(m.row_sum(c), 4);
        }
    }

    #[test]
    fn trace_over_total_is_accuracy() {
        let mut m = ConfusionMatrix::new(2);
        m.record(1, 1);
        m.record(1, 2);
        m.record(2, 2);
        m.record(2, 2);
        assert_eq!(m.accuracy(), 3.0 / 4.0);
        assert_eq!(m.row_sum(1), 2);
    }
}
