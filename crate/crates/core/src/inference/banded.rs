/// Symmetric band matrix storing the lower band `j ≤ i ≤ j + bw`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    /// Row-major `n × (bw + 1)`: `data[i·(bw+1) + (i − j)]` holds `A[i][j]`.
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i - j <= self.bw).then(|| i * (self.bw + 1) + (i - j))
    }

    /// `A[i][j]`; exactly zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to `A[i][j]` (and its mirror).
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry inside band");
        self.data[s] += v;
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        self.add(i, i, v);
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.get(i, j);
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Band Cholesky `A = L Lᵀ`; `None` when `A` is not positive definite.
    pub fn cholesky(&self) -> Option<BandedSym> {
        let (n, bw) = (self.n, self.bw);
        let mut l = BandedSym::zeros(n, bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.get(i, j);
                for p in lo.max(j.saturating_sub(bw))..j {
                    s -= l.get(i, p) * l.get(j, p);
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    let d = s.sqrt();
                    let slot = l.slot(i, i).expect("diagonal");
                    l.data[slot] = d;
                } else {
                    let v = s / l.get(j, j);
                    let slot = l.slot(i, j).expect("in band");
                    l.data[slot] = v;
                }
            }
        }
        Some(l)
    }

    /// Solves `L Lᵀ x = b` given the factor from [`cholesky`](Self::cholesky).
    pub fn cholesky_solve(factor: &BandedSym, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (factor.n, factor.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in i.saturating_sub(bw)..i {
                s -= factor.get(i, p) * y[p];
            }
            y[i] = s / factor.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..(i + bw + 1).min(n) {
                s -= factor.get(p, i) * y[p];
            }
            y[i] = s / factor.get(i, i);
        }
        y
    }
}
