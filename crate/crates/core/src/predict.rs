//! Sequential prediction with the posterior predictive distribution.

use crate::alphabet::Series;
use crate::count_tree::{CountTree, TreeOptions};
use crate::error::{BctError, Result};
use crate::exact::CtwState;
use std::io::Write;

/// `P*_D(x_{n+1} = a | x_1^n)` for every symbol `a`.
pub fn predictive_dist(state: &CtwState) -> Vec<f64> {
    state.log_predictive().into_iter().map(f64::exp).collect()
}

/// Log-loss of sequential prediction on a test segment, in nats.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossCurve {
    /// `-ln Q(x_{t+i} | past)` for each predicted symbol.
    pub per_step: Vec<f64>,
    /// Running sums of `per_step`.
    pub cumulative: Vec<f64>,
}

impl LossCurve {
    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    pub fn total_nats(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn total_bits(&self) -> f64 {
        self.total_nats() / std::f64::consts::LN_2
    }

    /// Mean loss per predicted symbol in bits; 0 for an empty curve.
    pub fn bits_per_symbol(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.total_bits() / self.len() as f64
        }
    }

    /// Tab-separated `step, cumulative_bits`, with a header line.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step\tcumulative_bits")?;
        for (i, c) in self.cumulative.iter().enumerate() {
            writeln!(w, "{}\t{}", i + 1, c / std::f64::consts::LN_2)?;
        }
        Ok(())
    }
}

/// Trains on `x_1..x_{train_len}`, then predicts each later symbol before
/// adding it to the model.
pub fn evaluate_log_loss(
    series: &Series,
    train_len: usize,
    max_depth: usize,
    beta: f64,
    options: &TreeOptions,
) -> Result<LossCurve> {
    if train_len > series.len() {
        return Err(BctError::TrainLengthOutOfRange {
            train_len,
            n: series.len(),
        });
    }
    let tree = CountTree::build_with(&series.prefix(train_len), max_depth, options)?;
    let mut state = CtwState::new(tree, beta)?;
    let mut curve = LossCurve::default();
    let mut total = 0.0;
    for &x in &series.data()[train_len..] {
        let loss = -state.log_predictive()[x as usize];
        total += loss;
        curve.per_step.push(loss);
        curve.cumulative.push(total);
        state.update(x)?;
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::exact::ctw;
    use crate::exact::testutil::random_series;
    use crate::likelihood::estimated_prob;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_before_data() {
        for m in 2..6 {
            let s = Series::new(Alphabet::numeric(m).unwrap(), vec![0; 3], vec![]).unwrap();
            let st = CtwState::from_series(&s, 3, 0.5).unwrap();
            for p in predictive_dist(&st) {
                assert!((p - 1.0 / m as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tiny_ratio_of_evidences() {
        let s = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0]).unwrap();
        let st = CtwState::from_series(&s, 1, 0.5).unwrap();
        let s4 = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0, 0]).unwrap();
        let ratio = (ctw(&CountTree::build(&s4, 1).unwrap(), 0.5).unwrap().ln()
            - ctw(&CountTree::build(&s, 1).unwrap(), 0.5).unwrap().ln())
        .exp();
        assert!((predictive_dist(&st)[0] - ratio).abs() < 1e-14);
    }

    #[test]
    fn normalization_on_random_prefixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = rng.random_range(2..=5);
            let d = rng.random_range(0..=6);
            let n = rng.random_range(0..=200);
            let s = random_series(&mut rng, m, d, n);
            let st = CtwState::from_series(&s, d, 0.7).unwrap();
            assert!((predictive_dist(&st).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn telescoping_and_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(2..=4);
            let d = rng.random_range(0..=5);
            let n = rng.random_range(1..=300);
            let s = random_series(&mut rng, m, d, n);
            let t = rng.random_range(0..=n);
            let curve = evaluate_log_loss(&s, t, d, 0.6, &TreeOptions::default()).unwrap();
            assert_eq!(curve.len(), n - t);
            let full = ctw(&CountTree::build(&s, d).unwrap(), 0.6).unwrap().ln();
            let train = ctw(&CountTree::build(&s.prefix(t), d).unwrap(), 0.6)
                .unwrap()
                .ln();
            assert!((curve.total_nats() - (train - full)).abs() < 1e-8);
            assert!(curve.cumulative.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn train_len_bounds() {
        let s = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0]).unwrap();
        let c = evaluate_log_loss(&s, 3, 1, 0.5, &TreeOptions::default()).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.total_nats(), 0.0);
        assert!(matches!(
            evaluate_log_loss(&s, 4, 1, 0.5, &TreeOptions::default()),
            Err(BctError::TrainLengthOutOfRange { .. })
        ));
    }

    #[test]
    fn all_zero_binary_bound() {
        for n in [1usize, 10, 100, 1000, 10_000] {
            let s = Series::new(Alphabet::numeric(2).unwrap(), vec![], vec![0; n]).unwrap();
            let c = evaluate_log_loss(&s, 0, 0, 0.5, &TreeOptions::default()).unwrap();
            assert!((c.total_nats() + estimated_prob(&[n as u64, 0]).ln()).abs() < 1e-9);
            assert!(c.total_bits() <= 0.5 * (n as f64).log2() + 1.0);
        }
    }

    #[test]
    fn table_export() {
        let s = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0, 1]).unwrap();
        let c = evaluate_log_loss(&s, 1, 1, 0.5, &TreeOptions::default()).unwrap();
        let mut buf = Vec::new();
        c.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("step\tcumulative_bits\n1\t"));
    }
}
