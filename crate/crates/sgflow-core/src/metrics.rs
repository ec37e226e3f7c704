//! Time-indexed observables shared by the simulator and the mean-field
//! solver: magnetization, self-overlap, training loss, training accuracy
//! and generalization error on a common grid `t = k * eta`.

use alloc::vec::Vec;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    pub times: Vec<f64>,
    /// Overlap with the cluster axis, `m = w.v*/d`.
    pub m: Vec<f64>,
    /// Self-overlap `q = |w|^2/d` (equal-time correlation).
    pub q: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub gen_err: Vec<f64>,
}

impl MetricsSeries {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            m: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            train_loss: Vec::with_capacity(n),
            train_acc: Vec::with_capacity(n),
            gen_err: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, m: f64, q: f64, loss: f64, acc: f64, gen: f64) {
        self.times.push(t);
        self.m.push(m);
        self.q.push(q);
        self.train_loss.push(loss);
        self.train_acc.push(acc);
        self.gen_err.push(gen);
    }

    /// Value of `gen_err` at the grid point closest to `t`.
    pub fn gen_err_at(&self, t: f64) -> Option<f64> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (*a - t).abs();
                let db = (*b - t).abs();
                da.partial_cmp(&db).expect("finite times")
            })?
            .0;
        self.gen_err.get(idx).copied()
    }
}
