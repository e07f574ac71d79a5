//! Null models for lagged dependence statistics.
//!
//! The analytic route: plug-in mutual information between independent
//! discrete variables is approximately Gamma((|X|−1)(|Y|−1)/2, 1/(N ln 2)),
//! equivalently a χ² scaled by 2N ln 2. The empirical route: shuffle the
//! rows of A repeatedly and count surrogate statistics at least as
//! extreme as the observed ones.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::infotheory;
use crate::marketdata::LaggedPair;
use crate::special;
use crate::symbolize::SymbolMatrix;
use crate::{Error, Result};

/// Gamma null for plug-in MI of independent variables.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GammaNull {
    /// shape (|X|−1)(|Y|−1)/2
    pub alpha: f64,
    /// scale 1/(N ln 2)
    pub beta: f64,
    pub n: usize,
}

pub fn gamma_null(qx: usize, qy: usize, n: usize) -> Result<GammaNull> {
    if qx < 2 || qy < 2 {
        return Err(Error::InvalidNullParams {
            msg: format!("alphabet sizes must be >= 2, got |X|={qx}, |Y|={qy}"),
        });
    }
    if n == 0 {
        return Err(Error::InvalidNullParams {
            msg: "sample size must be positive".into(),
        });
    }
    Ok(GammaNull {
        alpha: ((qx - 1) * (qy - 1)) as f64 / 2.0,
        beta: 1.0 / (n as f64 * std::f64::consts::LN_2),
        n,
    })
}

/// The x (in bits) with P(alpha, x/beta) = prob.
pub fn gamma_quantile(g: &GammaNull, prob: f64) -> Result<f64> {
    if !(0.0 < prob && prob < 1.0) {
        return Err(Error::InvalidArgument {
            msg: format!("quantile probability {prob} outside (0,1)"),
        });
    }
    Ok(g.beta * special::gamma_p_inv(g.alpha, prob)?)
}

/// Upper-tail probability of the observed MI under the null.
pub fn mi_pvalue(g: &GammaNull, observed_mi: f64) -> Result<f64> {
    if observed_mi < 0.0 {
        return Err(Error::InvalidArgument {
            msg: format!("observed MI {observed_mi} is negative"),
        });
    }
    special::gamma_q(g.alpha, observed_mi / g.beta)
}

/// Lagged Pearson correlation matrix between columns of A and columns of B.
#[derive(Debug, Clone)]
pub struct LaggedCorrMatrix {
    pub c: Array2<f64>,
    pub lambda: usize,
    pub t: usize,
}

/// Column-standardized copy (mean 0, unit sample sd with T−1 divisor).
fn standardize(m: ArrayView2<f64>, symbols: &[String]) -> Result<Array2<f64>> {
    let t = m.nrows();
    let mut z = m.to_owned();
    for (j, mut col) in z.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / t as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t as f64 - 1.0);
        if var == 0.0 {
            return Err(Error::ConstantColumn {
                column: symbols.get(j).cloned().unwrap_or_else(|| j.to_string()),
            });
        }
        let sd = var.sqrt();
        col.mapv_inplace(|v| (v - mean) / sd);
    }
    Ok(z)
}

pub fn lagged_pearson(pair: &LaggedPair) -> Result<LaggedCorrMatrix> {
    let t = pair.rows();
    if t < 3 {
        return Err(Error::InvalidArgument {
            msg: format!("need at least 3 aligned rows, got {t}"),
        });
    }
    let za = standardize(pair.a.view(), &pair.symbols)?;
    let zb = standardize(pair.b.view(), &pair.symbols)?;
    let c = za.t().dot(&zb) / (t as f64 - 1.0);
    Ok(LaggedCorrMatrix {
        c,
        lambda: pair.lambda,
        t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mi,
    Pearson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuffleMode {
    /// permute whole rows of A, preserving cross-sectional structure
    Rows,
    /// independent permutation per column, diagnostics only
    PerColumn,
}

/// Surrogate exceedance counts from repeated row shuffling of A.
///
/// `u[(m,n)]` counts realizations with surrogate statistic >= observed;
/// `d` (Pearson only) counts realizations <= observed. Ties count in both.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCounts {
    pub u: Array2<u32>,
    pub d: Option<Array2<u32>>,
    pub n_shuffles: usize,
    pub seed: u64,
}

impl SurrogateCounts {
    /// One-tailed upper p-value U/n_shuffles; zero means the observed
    /// statistic exceeded every surrogate.
    pub fn upper_pvalue(&self, m: usize, n: usize) -> f64 {
        self.u[[m, n]] as f64 / self.n_shuffles as f64
    }

    pub fn lower_pvalue(&self, m: usize, n: usize) -> Option<f64> {
        self.d
            .as_ref()
            .map(|d| d[[m, n]] as f64 / self.n_shuffles as f64)
    }
}

fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// MI of every ordered (column of A, column of B) pair of a symbolized pair.
pub fn mi_matrix(sym_a: &SymbolMatrix, sym_b: &SymbolMatrix) -> Array2<f64> {
    let n = sym_a.columns.len();
    let mut out = Array2::zeros((n, sym_b.columns.len()));
    let cells: Vec<((usize, usize), f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|m| {
            (0..sym_b.columns.len()).map(move |c| (m, c))
        })
        .map(|(m, c)| {
            let mi = infotheory::mutual_information(&sym_a.columns[m], &sym_b.columns[c])
                .expect("columns share length by construction");
            (((m, c)), mi)
        })
        .collect();
    for ((m, c), v) in cells {
        out[[m, c]] = v;
    }
    out
}

fn mi_matrix_permuted(
    sym_a: &SymbolMatrix,
    sym_b: &SymbolMatrix,
    perm: &[usize],
    log_table: &[f64],
) -> Array2<f64> {
    let na = sym_a.columns.len();
    let nb = sym_b.columns.len();
    let q = sym_a.q.max(sym_b.q);
    let t = perm.len();
    let mut out = Array2::zeros((na, nb));
    let mut counts = vec![0u32; q * q];
    for m in 0..na {
        let xa = &sym_a.columns[m].symbols;
        for n in 0..nb {
            let yb = &sym_b.columns[n].symbols;
            counts.iter_mut().for_each(|c| *c = 0);
            for (i, &p) in perm.iter().enumerate() {
                counts[xa[p] as usize * q + yb[i] as usize] += 1;
            }
            // H = log2 T − (1/T) Σ c·log2 c per margin and jointly
            let mut rows = vec![0u32; q];
            let mut cols = vec![0u32; q];
            let mut joint_sum = 0.0;
            for a in 0..q {
                for b in 0..q {
                    let c = counts[a * q + b];
                    rows[a] += c;
                    cols[b] += c;
                    joint_sum += log_table[c as usize];
                }
            }
            let row_sum: f64 = rows.iter().map(|&c| log_table[c as usize]).sum();
            let col_sum: f64 = cols.iter().map(|&c| log_table[c as usize]).sum();
            let tf = t as f64;
            // I = H(x)+H(y)−H(x,y) with shared log2 T terms cancelling
            out[[m, n]] = (joint_sum - row_sum - col_sum) / tf + tf.log2();
        }
    }
    out
}

/// `c * log2(c)` for counts 0..=t.
fn count_log_table(t: usize) -> Vec<f64> {
    (0..=t)
        .map(|c| if c == 0 { 0.0 } else { c as f64 * (c as f64).log2() })
        .collect()
}

pub struct ShuffleConfig {
    pub statistic: Statistic,
    pub n_shuffles: usize,
    pub seed: u64,
    pub mode: ShuffleMode,
    /// alphabet size used when statistic is MI
    pub q: usize,
}

/// Shuffle rows of A `n_shuffles` times and count surrogate statistics
/// at least as extreme as the empirical ones. Deterministic for a fixed
/// seed regardless of thread schedule.
pub fn shuffle_surrogates(pair: &LaggedPair, cfg: &ShuffleConfig) -> Result<SurrogateCounts> {
    if cfg.n_shuffles == 0 {
        return Err(Error::InvalidArgument {
            msg: "need at least one shuffle".into(),
        });
    }
    let t = pair.rows();
    let n_assets = pair.n_assets();

    match cfg.statistic {
        Statistic::Pearson => {
            let observed = lagged_pearson(pair)?.c;
            let za = standardize(pair.a.view(), &pair.symbols)?;
            let zb = standardize(pair.b.view(), &pair.symbols)?;
            let (u, d) = (0..cfg.n_shuffles as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = realization_rng(cfg.seed, i);
                    let za_perm = permuted_rows(&za, t, cfg.mode, &mut rng);
                    let c_tilde = za_perm.t().dot(&zb) / (t as f64 - 1.0);
                    let mut u = Array2::<u32>::zeros((n_assets, n_assets));
                    let mut d = Array2::<u32>::zeros((n_assets, n_assets));
                    for m in 0..n_assets {
                        for n in 0..n_assets {
                            if c_tilde[[m, n]] >= observed[[m, n]] {
                                u[[m, n]] += 1;
                            }
                            if c_tilde[[m, n]] <= observed[[m, n]] {
                                d[[m, n]] += 1;
                            }
                        }
                    }
                    (u, d)
                })
                .reduce(
                    || {
                        (
                            Array2::zeros((n_assets, n_assets)),
                            Array2::zeros((n_assets, n_assets)),
                        )
                    },
                    |(ua, da), (ub, db)| (ua + ub, da + db),
                );
            Ok(SurrogateCounts {
                u,
                d: Some(d),
                n_shuffles: cfg.n_shuffles,
                seed: cfg.seed,
            })
        }
        Statistic::Mi => {
            let sym_a = crate::symbolize::symbolize_matrix(pair.a.view(), cfg.q)?;
            let sym_b = crate::symbolize::symbolize_matrix(pair.b.view(), cfg.q)?;
            let observed = mi_matrix(&sym_a, &sym_b);
            let log_table = count_log_table(t);
            let u = (0..cfg.n_shuffles as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = realization_rng(cfg.seed, i);
                    let mut perm: Vec<usize> = (0..t).collect();
                    perm.shuffle(&mut rng);
                    let mi_tilde = mi_matrix_permuted(&sym_a, &sym_b, &perm, &log_table);
                    let mut u = Array2::<u32>::zeros((n_assets, n_assets));
                    for m in 0..n_assets {
                        for n in 0..n_assets {
                            if mi_tilde[[m, n]] >= observed[[m, n]] - 1e-12 {
                                u[[m, n]] += 1;
                            }
                        }
                    }
                    u
                })
                .reduce(|| Array2::zeros((n_assets, n_assets)), |a, b| a + b);
            Ok(SurrogateCounts {
                u,
                d: None,
                n_shuffles: cfg.n_shuffles,
                seed: cfg.seed,
            })
        }
    }
}

fn permuted_rows(
    z: &Array2<f64>,
    t: usize,
    mode: ShuffleMode,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    match mode {
        ShuffleMode::Rows => {
            let mut perm: Vec<usize> = (0..t).collect();
            perm.shuffle(rng);
            let mut out = Array2::zeros(z.raw_dim());
            for (dst, &src) in perm.iter().enumerate() {
                out.row_mut(dst).assign(&z.row(src));
            }
            out
        }
        ShuffleMode::PerColumn => {
            let mut out = z.clone();
            for mut col in out.columns_mut() {
                let mut vals: Vec<f64> = col.to_vec();
                vals.shuffle(rng);
                for (dst, v) in col.iter_mut().zip(vals) {
                    *dst = v;
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::LaggedPair;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_null_substitution() {
        let g = gamma_null(4, 4, 1000).unwrap();
        assert_eq!(g.alpha, 4.5);
        assert_relative_eq!(g.beta, 1.442695e-3, max_relative = 1e-6);
        let g = gamma_null(2, 2, 100).unwrap();
        assert_eq!(g.alpha, 0.5);
        assert_relative_eq!(g.beta, 1.442695e-2, max_relative = 1e-6);
        let g = gamma_null(4, 2, 3000).unwrap();
        assert_eq!(g.alpha, 1.5);
        assert_relative_eq!(g.beta, 4.808984e-4, max_relative = 1e-6);
    }

    #[test]
    fn invalid_null_params() {
        assert!(gamma_null(1, 4, 10).is_err());
        assert!(gamma_null(4, 4, 0).is_err());
    }

    #[test]
    fn exponential_median() {
        let g = GammaNull {
            alpha: 1.0,
            beta: 0.37,
            n: 1,
        };
        let x = gamma_quantile(&g, 0.5).unwrap();
        assert_relative_eq!(x, 0.37 * std::f64::consts::LN_2, max_relative = 1e-10);
    }

    #[test]
    fn chi2_identity_quantiles() {
        // frozen from an independent chi-squared quantile reference:
        // chi2_ppf(0.99, 9) = 21.665994333461924
        let n = 1000.0;
        let g = gamma_null(4, 4, 1000).unwrap();
        let x = gamma_quantile(&g, 0.99).unwrap();
        assert_relative_eq!(
            x,
            21.665994333461924 / (2.0 * n * std::f64::consts::LN_2),
            max_relative = 1e-9
        );
        assert_relative_eq!(x, 0.015628711290406952, max_relative = 1e-9);
        // chi2_ppf(0.95, 1) = 3.841458820694124 with beta=2 scale
        let g1 = GammaNull {
            alpha: 0.5,
            beta: 2.0,
            n: 1,
        };
        assert_relative_eq!(
            gamma_quantile(&g1, 0.95).unwrap(),
            3.841458820694124,
            max_relative = 1e-9
        );
    }

    #[test]
    fn pvalue_bounds_and_roundtrip() {
        let g = gamma_null(4, 4, 1000).unwrap();
        assert_eq!(mi_pvalue(&g, 0.0).unwrap(), 1.0);
        let x99 = gamma_quantile(&g, 0.99).unwrap();
        assert_relative_eq!(mi_pvalue(&g, x99).unwrap(), 0.01, epsilon = 1e-10);
        // frozen from chi2 upper tail at 2*1000*ln2*0.03 = 41.5888
        let p = mi_pvalue(&g, 0.03).unwrap();
        assert_relative_eq!(p, 3.9069007816549335e-6, max_relative = 1e-6);
    }

    #[test]
    fn quantile_pvalue_inverse_pairs() {
        let g = gamma_null(4, 4, 2000).unwrap();
        for p in [0.1, 0.01, 1e-4, 1e-6] {
            let x = gamma_quantile(&g, 1.0 - p).unwrap();
            assert_relative_eq!(mi_pvalue(&g, x).unwrap(), p, epsilon = 1e-9);
        }
    }

    fn pair_from_columns(a_cols: Vec<Vec<f64>>, b_cols: Vec<Vec<f64>>, lambda: usize) -> LaggedPair {
        let t = a_cols[0].len();
        let n = a_cols.len();
        let mut a = Array2::zeros((t, n));
        let mut b = Array2::zeros((t, n));
        for (j, (ca, cb)) in a_cols.iter().zip(&b_cols).enumerate() {
            for i in 0..t {
                a[[i, j]] = ca[i];
                b[[i, j]] = cb[i];
            }
        }
        LaggedPair {
            symbols: (0..n).map(|i| format!("S{i}")).collect(),
            a,
            b,
            lambda,
            day_index: vec![0; t],
        }
    }

    #[test]
    fn self_correlation_is_one() {
        let x = vec![1.0, -0.5, 2.0, 0.3, -1.2];
        let pair = pair_from_columns(vec![x.clone()], vec![x], 0);
        let c = lagged_pearson(&pair).unwrap();
        assert_relative_eq!(c.c[[0, 0]], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sign_flip_is_minus_one() {
        let x = vec![1.0, -0.5, 2.0, 0.3, -1.2];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let pair = pair_from_columns(vec![x], vec![neg], 0);
        assert_relative_eq!(lagged_pearson(&pair).unwrap().c[[0, 0]], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn hand_evaluated_correlation() {
        let pair = pair_from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![vec![1.0, 3.0, 2.0, 4.0]],
            0,
        );
        assert_relative_eq!(lagged_pearson(&pair).unwrap().c[[0, 0]], 0.8, max_relative = 1e-12);
    }

    #[test]
    fn constant_column_is_error() {
        let pair = pair_from_columns(vec![vec![1.0, 1.0, 1.0]], vec![vec![1.0, 2.0, 3.0]], 0);
        let err = lagged_pearson(&pair).unwrap_err();
        assert!(matches!(err, Error::ConstantColumn { .. }));
    }

    #[test]
    fn synchronous_pearson_matches_direct_covariance() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let t = 200;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..t).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let pair = pair_from_columns(cols.clone(), cols.clone(), 0);
        let c = lagged_pearson(&pair).unwrap().c;
        for m in 0..3 {
            for n in 0..3 {
                // direct covariance oracle
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let (ma, mb) = (mean(&cols[m]), mean(&cols[n]));
                let cov: f64 = cols[m]
                    .iter()
                    .zip(&cols[n])
                    .map(|(a, b)| (a - ma) * (b - mb))
                    .sum::<f64>()
                    / (t as f64 - 1.0);
                let sa = (cols[m].iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (t as f64 - 1.0))
                    .sqrt();
                let sb = (cols[n].iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (t as f64 - 1.0))
                    .sqrt();
                assert_relative_eq!(c[[m, n]], cov / (sa * sb), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn shuffle_determinism() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..60).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let pair = pair_from_columns(cols.clone(), cols, 1);
        for statistic in [Statistic::Mi, Statistic::Pearson] {
            let cfg = ShuffleConfig {
                statistic,
                n_shuffles: 50,
                seed: 42,
                mode: ShuffleMode::Rows,
                q: 4,
            };
            let a = shuffle_surrogates(&pair, &cfg).unwrap();
            let b = shuffle_surrogates(&pair, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pearson_ties_count_in_both_u_and_d() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..40).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let pair = pair_from_columns(cols.clone(), cols, 0);
        let counts = shuffle_surrogates(
            &pair,
            &ShuffleConfig {
                statistic: Statistic::Pearson,
                n_shuffles: 30,
                seed: 1,
                mode: ShuffleMode::Rows,
                q: 4,
            },
        )
        .unwrap();
        let d = counts.d.as_ref().unwrap();
        for m in 0..2 {
            for n in 0..2 {
                assert!(counts.u[[m, n]] + d[[m, n]] >= 30);
                assert!(counts.u[[m, n]] <= 30);
            }
        }
    }

    #[test]
    fn coupled_pair_has_zero_exceedances() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let x: Vec<f64> = (0..500).map(|_| rng.gen::<f64>() - 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.01 * (rng.gen::<f64>() - 0.5)).collect();
        let pair = pair_from_columns(vec![x.clone(), y.clone()], vec![x, y], 0);
        let counts = shuffle_surrogates(
            &pair,
            &ShuffleConfig {
                statistic: Statistic::Mi,
                n_shuffles: 1000,
                seed: 7,
                mode: ShuffleMode::Rows,
                q: 4,
            },
        )
        .unwrap();
        assert_eq!(counts.u[[0, 1]], 0);
        assert_eq!(counts.u[[1, 0]], 0);
    }

    #[test]
    fn independent_columns_uniform_exceedance() {
        // empirical p-values of independent pairs should look uniform
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n_assets = 8;
        let cols: Vec<Vec<f64>> = (0..n_assets)
            .map(|_| (0..300).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let cols_b: Vec<Vec<f64>> = (0..n_assets)
            .map(|_| (0..300).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let pair = pair_from_columns(cols, cols_b, 1);
        let counts = shuffle_surrogates(
            &pair,
            &ShuffleConfig {
                statistic: Statistic::Mi,
                n_shuffles: 1000,
                seed: 99,
                mode: ShuffleMode::Rows,
                q: 4,
            },
        )
        .unwrap();
        let mut ps: Vec<f64> = Vec::new();
        for m in 0..n_assets {
            for n in 0..n_assets {
                ps.push(counts.upper_pvalue(m, n));
            }
        }
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // KS statistic against uniform
        let n = ps.len() as f64;
        let ks = ps
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let hi = (i as f64 + 1.0) / n - p;
                let lo = p - i as f64 / n;
                hi.max(lo)
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.1, "KS statistic {ks}");
    }
}
