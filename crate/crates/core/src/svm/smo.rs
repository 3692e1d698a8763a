//! Dual solver for `min ½ αᵀQα + pᵀα` subject to `yᵀα = 0`, `0 ≤ α ≤ C`,
//! using maximal-gain second-order working-set selection.

const TAU: f64 = 1e-12;

/// Dense symmetric matrix `Q_ij = y_i y_j K_ij`, stored row-major.
pub(crate) struct QMatrix {
    n: usize,
    data: Vec<f64>,
}

impl QMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        QMatrix { n, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `m(α) − M(α)` at exit; ≤ tolerance when converged.
    pub kkt_gap: f64,
}

pub(crate) fn solve(q: &QMatrix, p: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = p.len();
    let mut alpha = vec![0.0; n];
    let mut grad = p.to_vec();
    let qd: Vec<f64> = (0..n).map(|i| q.row(i)[i]).collect();
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        let Some((i, j, g)) = select(q, &qd, &alpha, &grad, y, c, tol) else {
            converged = true;
            gap = gap_of(&alpha, &grad, y, c);
            break;
        };
        gap = g;
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qi = q.row(i);
        let (mut a_i, mut a_j) = (old_i, old_j);
        let (ai, aj) = (&mut a_i, &mut a_j);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qi[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = *ai - *aj;
            *ai += delta;
            *aj += delta;
            if diff > 0.0 {
                if *aj < 0.0 {
                    *aj = 0.0;
                    *ai = diff;
                }
            } else if *ai < 0.0 {
                *ai = 0.0;
                *aj = -diff;
            }
            if diff > 0.0 {
                if *ai > c {
                    *ai = c;
                    *aj = c - diff;
                }
            } else if *aj > c {
                *aj = c;
                *ai = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qi[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = *ai + *aj;
            *ai -= delta;
            *aj += delta;
            if sum > c {
                if *ai > c {
                    *ai = c;
                    *aj = sum - c;
                }
            } else if *aj < 0.0 {
                *aj = 0.0;
                *ai = sum;
            }
            if sum > c {
                if *aj > c {
                    *aj = c;
                    *ai = sum - c;
                }
            } else if *ai < 0.0 {
                *ai = 0.0;
                *aj = sum;
            }
        }
        alpha[i] = a_i;
        alpha[j] = a_j;

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let qj = q.row(j);
        for ((g, &a), &b) in grad.iter_mut().zip(qi).zip(qj) {
            *g += a * di + b * dj;
        }
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without converging (gap {gap:.3e})");
    }

    Solution { rho: rho(&alpha, &grad, y, c), alpha, iterations, converged, kkt_gap: gap }
}

fn at_upper(a: f64, c: f64) -> bool {
    a >= c
}

fn at_lower(a: f64) -> bool {
    a <= 0.0
}

fn gap_of(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut gmax = f64::NEG_INFINITY;
    let mut gmax2 = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let (up, low) = if y[t] > 0.0 {
            (!at_upper(alpha[t], c), !at_lower(alpha[t]))
        } else {
            (!at_lower(alpha[t]), !at_upper(alpha[t], c))
        };
        let yg = -y[t] * grad[t];
        if up {
            gmax = gmax.max(yg);
        }
        if low {
            gmax2 = gmax2.max(-yg);
        }
    }
    if gmax == f64::NEG_INFINITY || gmax2 == f64::NEG_INFINITY {
        0.0
    } else {
        (gmax + gmax2).max(0.0)
    }
}

fn select(
    q: &QMatrix,
    qd: &[f64],
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    c: f64,
    tol: f64,
) -> Option<(usize, usize, f64)> {
    let n = alpha.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..n {
        if y[t] > 0.0 {
            if !at_upper(alpha[t], c) && -grad[t] >= gmax {
                gmax = -grad[t];
                i = Some(t);
            }
        } else if !at_lower(alpha[t]) && grad[t] >= gmax {
            gmax = grad[t];
            i = Some(t);
        }
    }
    let i = i?;
    let qi = q.row(i);
    let mut gmax2 = f64::NEG_INFINITY;
    let mut j = None;
    let mut best = f64::INFINITY;
    for t in 0..n {
        if y[t] > 0.0 {
            if !at_lower(alpha[t]) {
                let diff = gmax + grad[t];
                gmax2 = gmax2.max(grad[t]);
                if diff > 0.0 {
                    let quad = (qd[i] + qd[t] - 2.0 * y[i] * qi[t]).max(TAU);
                    let obj = -diff * diff / quad;
                    if obj <= best {
                        best = obj;
                        j = Some(t);
                    }
                }
            }
        } else if !at_upper(alpha[t], c) {
            let diff = gmax - grad[t];
            gmax2 = gmax2.max(-grad[t]);
            if diff > 0.0 {
                let quad = (qd[i] + qd[t] + 2.0 * y[i] * qi[t]).max(TAU);
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j = Some(t);
                }
            }
        }
    }
    let gap = gmax + gmax2;
    if gap < tol {
        return None;
    }
    j.map(|j| (i, j, gap))
}

fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t], c) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}
