use crate::error::{Error, Result};

/// Time series of named real columns sampled on a decimated grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecimatedTable {
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DecimatedTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let columns = vec![Vec::new(); names.len()];
        Self {
            steps: Vec::new(),
            times: Vec::new(),
            names,
            columns,
        }
    }

    pub fn push_row(&mut self, step: u64, time: f64, values: &[f64]) {
        assert_eq!(values.len(), self.names.len(), "row width mismatch");
        self.steps.push(step);
        self.times.push(time);
        for (col, &v) in self.columns.iter_mut().zip(values) {
            col.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::Record(format!("missing column {name:?}")))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| c.last().copied())
    }

    /// Adds a whole column; its length must match the row count.
    pub fn add_column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "column length mismatch");
        self.names.push(name.into());
        self.columns.push(values);
    }

    /// Row indices whose time lies in `[t0, t1]`.
    pub fn rows_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = usize> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t >= t0 - 1e-12 && t <= t1 + 1e-12)
            .map(|(i, _)| i)
    }
}

/// Steps at which decimated samples are taken: `0, d, 2d, …` plus the final
/// step if it is not a multiple of `d`.
pub fn sample_steps(n_steps: usize, decimation: usize) -> Vec<u64> {
    let d = decimation.max(1);
    let mut out: Vec<u64> = (0..=n_steps).step_by(d).map(|s| s as u64).collect();
    if n_steps % d != 0 {
        out.push(n_steps as u64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_grid() {
        assert_eq!(sample_steps(10, 5), vec![0, 5, 10]);
        assert_eq!(sample_steps(11, 5), vec![0, 5, 10, 11]);
        assert_eq!(sample_steps(0, 5), vec![0]);
    }

    #[test]
    fn table_columns() {
        let mut t = DecimatedTable::new(["a", "b"]);
        t.push_row(0, 0.0, &[1.0, 2.0]);
        t.push_row(5, 0.5, &[3.0, 4.0]);
        assert_eq!(t.column("b"), Some(&[2.0, 4.0][..]));
        assert_eq!(t.last("a"), Some(3.0));
        assert!(t.require("c").is_err());
        assert_eq!(t.rows_in(0.4, 1.0).collect::<Vec<_>>(), vec![1]);
    }
}
