//! Complex banded LU with partial pivoting (LAPACK `gbtrf` layout idea, row-major).

use num_complex::Complex64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals, with room for the
/// `kl` extra super-diagonals created by row interchanges.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku + self.kl {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.slot(i, j).map_or(Complex64::new(0.0, 0.0), |s| self.data[s])
    }

    /// Panics when `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j).expect("in band");
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization; pivots with modulus below `floor` are lifted to `floor`.
    pub fn factor(mut self, floor: f64) -> BandLu {
        let n = self.n;
        let mut piv = vec![0usize; n];
        let mut perturbed = 0;
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&r, &s| self.get(r, k).norm().total_cmp(&self.get(s, k).norm()))
                .unwrap_or(k);
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.slot(k, j).unwrap(), self.slot(p, j).unwrap());
                    self.data.swap(a, b);
                }
            }
            let dk = self.slot(k, k).unwrap();
            if self.data[dk].norm() < floor || self.data[dk].norm() == 0.0 {
                let phase = if self.data[dk].norm() > 0.0 {
                    self.data[dk] / self.data[dk].norm()
                } else {
                    Complex64::new(1.0, 0.0)
                };
                self.data[dk] = phase * floor.max(f64::MIN_POSITIVE);
                perturbed += 1;
            }
            let pivot = self.data[dk];
            for r in k + 1..=last {
                let rk = self.slot(r, k).unwrap();
                let f = self.data[rk] / pivot;
                self.data[rk] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for j in k + 1..=jmax {
                        let u = self.data[self.slot(k, j).unwrap()];
                        let s = self.slot(r, j).unwrap();
                        self.data[s] -= f * u;
                    }
                }
            }
        }
        BandLu {
            m: self,
            piv,
            perturbed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    pub perturbed: usize,
}

impl BandLu {
    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(1.0, 0.0);
        for k in 0..self.m.n {
            d *= self.m.get(k, k);
            if self.piv[k] != k {
                d = -d;
            }
        }
        d
    }

    /// `(log |det|, det/|det|)`, safe for large sizes.
    pub fn log_det(&self) -> (f64, Complex64) {
        let mut logabs = 0.0;
        let mut phase = Complex64::new(1.0, 0.0);
        for k in 0..self.m.n {
            let u = self.m.get(k, k);
            let a = u.norm();
            logabs += a.ln();
            phase *= u / a;
            if self.piv[k] != k {
                phase = -phase;
            }
        }
        (logabs, phase)
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.m.n;
        let (kl, reach) = (self.m.kl, self.m.ku + self.m.kl);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.m.get(r, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.m.get(k, j) * b[j];
            }
            b[k] = s / self.m.get(k, k);
        }
    }
}
