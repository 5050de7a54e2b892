//! Gaussian elimination with partial pivoting for banded systems.
//!
//! Rows are stored as windows `[start, start + vals.len())` that grow to
//! the right as fill-in appears; with lower bandwidth `kl` and upper
//! bandwidth `ku` the pivoted upper factor has bandwidth `kl + ku`.

use num_complex::Complex64;

struct Row {
    start: usize,
    vals: Vec<Complex64>,
}

impl Row {
    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn get(&self, col: usize) -> Complex64 {
        if col >= self.start && col < self.end() {
            self.vals[col - self.start]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

pub(crate) struct BandedSystem {
    kl: usize,
    rows: Vec<Row>,
    rhs: Vec<Complex64>,
}

impl BandedSystem {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let start = i.saturating_sub(kl);
                let end = (i + ku + 1).min(n);
                Row {
                    start,
                    vals: vec![Complex64::new(0.0, 0.0); end - start],
                }
            })
            .collect();
        BandedSystem {
            kl,
            rows,
            rhs: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Panics if `(row, col)` lies outside the declared band.
    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        let r = &mut self.rows[row];
        assert!(
            col >= r.start && col < r.end(),
            "entry ({row}, {col}) outside band"
        );
        r.vals[col - r.start] += value;
    }

    pub fn set_rhs(&mut self, row: usize, value: Complex64) {
        self.rhs[row] = value;
    }

    /// Solve in place. Returns `None` when a pivot falls below
    /// `rel_pivot_tol` times the largest initial entry.
    pub fn solve(mut self, rel_pivot_tol: f64) -> Option<Vec<Complex64>> {
        let n = self.rows.len();
        let scale = self
            .rows
            .iter()
            .flat_map(|r| r.vals.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        let tiny = rel_pivot_tol * scale.max(f64::MIN_POSITIVE);

        for i in 0..n {
            let last = (i + self.kl + 1).min(n);
            let (mut pivot_row, mut best) = (i, self.rows[i].get(i).norm());
            for q in i + 1..last {
                let v = self.rows[q].get(i).norm();
                if v > best {
                    best = v;
                    pivot_row = q;
                }
            }
            if best.is_nan() || best <= tiny {
                return None;
            }
            self.rows.swap(i, pivot_row);
            self.rhs.swap(i, pivot_row);

            let pivot = std::mem::replace(
                &mut self.rows[i],
                Row {
                    start: 0,
                    vals: Vec::new(),
                },
            );
            let piv = pivot.get(i);
            let pend = pivot.end();
            let rhs_i = self.rhs[i];
            for q in i + 1..last {
                let row = &mut self.rows[q];
                let f = row.get(i) / piv;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                if row.end() < pend {
                    row.vals.resize(pend - row.start, Complex64::new(0.0, 0.0));
                }
                let src = &pivot.vals[(i + 1 - pivot.start)..];
                let dst = &mut row.vals[(i + 1 - row.start)..(pend - row.start)];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= f * s;
                }
                row.vals[i - row.start] = Complex64::new(0.0, 0.0);
                self.rhs[q] -= f * rhs_i;
            }
            self.rows[i] = pivot;
        }

        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let row = &self.rows[i];
            let mut acc = self.rhs[i];
            for (v, xc) in row.vals[i + 1 - row.start..]
                .iter()
                .zip(&x[i + 1..row.end()])
            {
                acc -= v * xc;
            }
            x[i] = acc / row.get(i);
        }
        Some(x)
    }
}
