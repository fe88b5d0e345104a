//! Variance-based sensitivity indices of a deterministic function on the
//! unit cube: Janon first-order and Jansen total-order estimators with
//! percentile-bootstrap confidence half-widths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowdisc::sobol_points;

pub const DEFAULT_BOOTSTRAP: usize = 100;
const DEGENERATE_VAR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub s1: Vec<f64>,
    pub s1_conf: Vec<f64>,
    pub st: Vec<f64>,
    pub st_conf: Vec<f64>,
    pub n_base: usize,
    /// Set when the function is (numerically) constant; all indices are 0.
    pub degenerate: bool,
}

struct Evaluations {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `ab[i][k]`: row `k` of A with column `i` taken from B.
    ab: Vec<Vec<f64>>,
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

fn indices(ev: &Evaluations, rows: &[usize]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rows.len();
    let m_all = mean(rows.iter().map(|&k| ev.a[k] + ev.b[k]), n) / 2.0;
    let var = mean(rows.iter().map(|&k| ev.a[k].powi(2) + ev.b[k].powi(2)), n) / 2.0 - m_all * m_all;
    let mut s1 = Vec::with_capacity(ev.ab.len());
    let mut st = Vec::with_capacity(ev.ab.len());
    for ab in &ev.ab {
        // B and AB_i share only column i.
        let m = mean(rows.iter().map(|&k| (ev.b[k] + ab[k]) / 2.0), n);
        let num = mean(rows.iter().map(|&k| ev.b[k] * ab[k]), n) - m * m;
        let den = mean(rows.iter().map(|&k| (ev.b[k].powi(2) + ab[k].powi(2)) / 2.0), n) - m * m;
        s1.push(if den > 0.0 { num / den } else { 0.0 });
        // A and AB_i differ only in column i.
        let jansen = mean(rows.iter().map(|&k| (ev.a[k] - ab[k]).powi(2)), n) / 2.0;
        st.push(if var > 0.0 { jansen / var } else { 0.0 });
    }
    (s1, st, var)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sensitivity of `f` over `[0, 1]^dim`. `n_base` must be a power of two
/// of at least 64.
pub fn sobol_indices<F>(f: F, dim: usize, n_base: usize, seed: u64, n_bootstrap: usize) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64,
{
    if dim < 1 {
        return Err(Error::domain("sensitivity analysis needs at least one dimension"));
    }
    if n_base < 64 || !n_base.is_power_of_two() {
        return Err(Error::domain(format!("N_base must be a power of two >= 64, got {n_base}")));
    }
    if n_bootstrap < 1 {
        return Err(Error::domain("need at least one bootstrap resample"));
    }
    let base = sobol_points(n_base, 2 * dim, seed)?;
    let a_rows: Vec<&[f64]> = base.iter().map(|r| &r[..dim]).collect();
    let b_rows: Vec<&[f64]> = base.iter().map(|r| &r[dim..]).collect();
    let ev = Evaluations {
        a: a_rows.iter().map(|r| f(r)).collect(),
        b: b_rows.iter().map(|r| f(r)).collect(),
        ab: (0..dim)
            .map(|i| {
                (0..n_base)
                    .map(|k| {
                        let mut p = a_rows[k].to_vec();
                        p[i] = b_rows[k][i];
                        f(&p)
                    })
                    .collect()
            })
            .collect(),
    };

    let all: Vec<usize> = (0..n_base).collect();
    let (s1, st, var) = indices(&ev, &all);
    let scale = mean(ev.a.iter().chain(&ev.b).map(|v| v * v), 2 * n_base).max(1.0);
    if var <= DEGENERATE_VAR * scale {
        log::warn!("surrogate mean is constant; sensitivity indices are degenerate");
        return Ok(SobolResult {
            s1: vec![0.0; dim],
            s1_conf: vec![0.0; dim],
            st: vec![0.0; dim],
            st_conf: vec![0.0; dim],
            n_base,
            degenerate: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007);
    let mut boot_s1 = vec![Vec::with_capacity(n_bootstrap); dim];
    let mut boot_st = vec![Vec::with_capacity(n_bootstrap); dim];
    let mut rows = vec![0; n_base];
    for _ in 0..n_bootstrap {
        for r in rows.iter_mut() {
            *r = rng.random_range(0..n_base);
        }
        let (b1, bt, _) = indices(&ev, &rows);
        for i in 0..dim {
            boot_s1[i].push(b1[i]);
            boot_st[i].push(bt[i]);
        }
    }
    let half_width = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        ((percentile(&v, 0.975) - percentile(&v, 0.025)) / 2.0).max(0.0)
    };
    Ok(SobolResult {
        s1,
        st,
        s1_conf: boot_s1.into_iter().map(half_width).collect(),
        st_conf: boot_st.into_iter().map(half_width).collect(),
        n_base,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_active_variable() {
        let r = sobol_indices(|x| x[0], 2, 1024, 1, 100).unwrap();
        assert!((r.s1[0] - 1.0).abs() < 0.05 && r.s1[1].abs() < 0.05, "{r:?}");
        assert!((r.st[0] - 1.0).abs() < 0.05 && r.st[1].abs() < 0.05, "{r:?}");
    }

    #[test]
    fn additive_pair() {
        let r = sobol_indices(|x| x[0] + x[1], 2, 1024, 2, 100).unwrap();
        for i in 0..2 {
            assert!((r.s1[i] - 0.5).abs() < 0.05 && (r.st[i] - 0.5).abs() < 0.05, "{r:?}");
            assert!((r.s1[i] - r.st[i]).abs() < 0.05);
        }
    }

    #[test]
    fn product_interaction() {
        // f = x1 * x2 on [0,1]^2: V = 7/144, V1 = V2 = 1/48, V12 = 1/144.
        let r = sobol_indices(|x| x[0] * x[1], 2, 4096, 3, 50).unwrap();
        let (s1, st) = (3.0 / 7.0, 4.0 / 7.0);
        for i in 0..2 {
            assert!((r.s1[i] - s1).abs() < 0.03, "{r:?}");
            assert!((r.st[i] - st).abs() < 0.03, "{r:?}");
            assert!(r.st[i] >= r.s1[i] - 0.02);
        }
    }

    #[test]
    fn constant_is_degenerate() {
        let r = sobol_indices(|_| 0.7, 3, 64, 0, 10).unwrap();
        assert!(r.degenerate);
        assert!(r.s1.iter().chain(&r.st).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(sobol_indices(|x| x[0], 0, 64, 0, 10).is_err());
        assert!(sobol_indices(|x| x[0], 2, 100, 0, 10).is_err());
        assert!(sobol_indices(|x| x[0], 2, 32, 0, 10).is_err());
    }
}
