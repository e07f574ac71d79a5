//! Synthetic market generators with known ground truth.
//!
//! Log-prices are Gaussian random walks; planted couplings feed a
//! function of a source return into a target return at a fixed lag.
//! The quadratic kind is mean-removed so its linear correlation is
//! exactly zero in expectation, which separates the mutual-information
//! pipeline from the Pearson baseline.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::marketdata::PriceMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    pub source: usize,
    pub target: usize,
    /// lag in steps, at least 1
    pub lag: usize,
    pub strength: f64,
    pub kind: CouplingKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_assets: usize,
    pub n_steps: usize,
    /// rows per trading day; `n_steps` not divisible leaves a short last day
    pub day_length: usize,
    pub seed: u64,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    /// per-asset loading on a shared factor; empty means no common factor
    #[serde(default)]
    pub common_factor_loading: Vec<f64>,
}

/// Ground truth emitted next to a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub edges: Vec<GroundTruthEdge>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthEdge {
    pub source: String,
    pub target: String,
    pub lag: usize,
    pub strength: f64,
    pub kind: CouplingKind,
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.n_steps < 2 {
        return Err(Error::InvalidSpec {
            msg: "need at least 2 steps".into(),
        });
    }
    if spec.n_assets == 0 || spec.day_length == 0 {
        return Err(Error::InvalidSpec {
            msg: "n_assets and day_length must be positive".into(),
        });
    }
    if !spec.common_factor_loading.is_empty()
        && spec.common_factor_loading.len() != spec.n_assets
    {
        return Err(Error::InvalidSpec {
            msg: "common_factor_loading length must equal n_assets".into(),
        });
    }
    for c in &spec.couplings {
        if c.lag == 0 {
            return Err(Error::InvalidSpec {
                msg: format!(
                    "coupling {} -> {} has lag 0; lead-lag couplings need lag >= 1",
                    c.source, c.target
                ),
            });
        }
        if c.source >= spec.n_assets || c.target >= spec.n_assets {
            return Err(Error::InvalidSpec {
                msg: "coupling references an asset out of range".into(),
            });
        }
        if !c.strength.is_finite() {
            return Err(Error::InvalidSpec {
                msg: "coupling strength must be finite".into(),
            });
        }
    }
    Ok(())
}

pub fn symbol_name(i: usize) -> String {
    format!("S{i:03}")
}

/// Generate returns, then integrate into strictly positive prices.
/// Returns are scaled down so prices stay in a comfortable float range.
fn prices_from_returns(spec: &SynthSpec, returns: &Array2<f64>) -> PriceMatrix {
    const SCALE: f64 = 0.01;
    let n = spec.n_steps;
    let mut prices = Array2::zeros((n, spec.n_assets));
    for a in 0..spec.n_assets {
        let mut log_price = 0.0;
        for t in 0..n {
            log_price += SCALE * returns[[t, a]];
            prices[[t, a]] = 100.0 * log_price.exp();
        }
    }
    let timestamps = (0..n).map(|t| format!("t{t:06}")).collect();
    let day_index = (0..n).map(|t| (t / spec.day_length) as i64).collect();
    PriceMatrix {
        symbols: (0..spec.n_assets).map(symbol_name).collect(),
        timestamps,
        day_index,
        prices,
    }
}

fn innovations(spec: &SynthSpec) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = rand_distr::StandardNormal;
    Array2::from_shape_fn((spec.n_steps, spec.n_assets), |_| rng.sample(normal))
}

/// Independent Gaussian random walks, no couplings, no common factor.
pub fn gen_iid(spec: &SynthSpec) -> Result<PriceMatrix> {
    validate(spec)?;
    if !spec.couplings.is_empty() {
        return Err(Error::InvalidSpec {
            msg: "gen_iid takes a spec without couplings".into(),
        });
    }
    let returns = innovations(spec);
    Ok(prices_from_returns(spec, &returns))
}

/// Couplings and common factor applied on top of per-asset noise:
/// target return at t += strength · f(source return at t−lag), with
/// f the identity (linear) or x ↦ x²−1 (quadratic, mean-removed for
/// unit-variance sources).
pub fn gen_coupled(spec: &SynthSpec) -> Result<(PriceMatrix, GroundTruth)> {
    validate(spec)?;
    let mut returns = innovations(spec);
    if !spec.common_factor_loading.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e3779b97f4a7c15);
        let normal = rand_distr::StandardNormal;
        for t in 0..spec.n_steps {
            let factor: f64 = rng.sample(normal);
            for a in 0..spec.n_assets {
                returns[[t, a]] += spec.common_factor_loading[a] * factor;
            }
        }
    }
    // lags are >= 1, so stepping forward in time resolves every chain
    for t in 0..spec.n_steps {
        for c in &spec.couplings {
            if t >= c.lag {
                let src = returns[[t - c.lag, c.source]];
                let drive = match c.kind {
                    CouplingKind::Linear => src,
                    CouplingKind::Quadratic => src * src - 1.0,
                };
                returns[[t, c.target]] += c.strength * drive;
            }
        }
    }
    let truth = GroundTruth {
        edges: spec
            .couplings
            .iter()
            .map(|c| GroundTruthEdge {
                source: symbol_name(c.source),
                target: symbol_name(c.target),
                lag: c.lag,
                strength: c.strength,
                kind: c.kind,
            })
            .collect(),
        seed: spec.seed,
    };
    Ok((prices_from_returns(spec, &returns), truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{build_lagged_pair, log_returns};
    use crate::nullmodels::lagged_pearson;

    fn iid_spec(n_assets: usize, n_steps: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_assets,
            n_steps,
            day_length: n_steps,
            seed,
            couplings: vec![],
            common_factor_loading: vec![],
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = iid_spec(2, 1000, 5);
        let a = gen_iid(&spec).unwrap();
        let b = gen_iid(&spec).unwrap();
        assert_eq!(a.prices, b.prices);
        let spec2 = SynthSpec {
            couplings: vec![Coupling {
                source: 0,
                target: 1,
                lag: 2,
                strength: 0.5,
                kind: CouplingKind::Quadratic,
            }],
            ..iid_spec(2, 1000, 5)
        };
        let (x, _) = gen_coupled(&spec2).unwrap();
        let (y, _) = gen_coupled(&spec2).unwrap();
        assert_eq!(x.prices, y.prices);
    }

    #[test]
    fn iid_columns_nearly_uncorrelated() {
        let spec = iid_spec(4, 1000, 11);
        let p = gen_iid(&spec).unwrap();
        let r = log_returns(&p, 1).unwrap();
        let pair = build_lagged_pair(&r, 0).unwrap();
        let c = lagged_pearson(&pair).unwrap().c;
        for m in 0..4 {
            for n in 0..4 {
                if m != n {
                    assert!(c[[m, n]].abs() < 0.1, "corr {} at ({m},{n})", c[[m, n]]);
                }
            }
        }
    }

    #[test]
    fn linear_coupling_shows_in_lagged_pearson() {
        let spec = SynthSpec {
            couplings: vec![Coupling {
                source: 0,
                target: 1,
                lag: 3,
                strength: 0.8,
                kind: CouplingKind::Linear,
            }],
            ..iid_spec(2, 3000, 13)
        };
        let (p, truth) = gen_coupled(&spec).unwrap();
        assert_eq!(truth.edges.len(), 1);
        let r = log_returns(&p, 1).unwrap();
        let pair = build_lagged_pair(&r, 3).unwrap();
        let c = lagged_pearson(&pair).unwrap().c;
        assert!(c[[0, 1]].abs() > 0.5, "got {}", c[[0, 1]]);
    }

    #[test]
    fn quadratic_coupling_invisible_to_pearson() {
        let spec = SynthSpec {
            couplings: vec![Coupling {
                source: 0,
                target: 1,
                lag: 2,
                strength: 0.8,
                kind: CouplingKind::Quadratic,
            }],
            ..iid_spec(2, 3000, 17)
        };
        let (p, _) = gen_coupled(&spec).unwrap();
        let r = log_returns(&p, 1).unwrap();
        let pair = build_lagged_pair(&r, 2).unwrap();
        let c = lagged_pearson(&pair).unwrap().c;
        assert!(c[[0, 1]].abs() < 0.1, "got {}", c[[0, 1]]);
        // while the MI clears the Bonferroni-corrected Gamma threshold
        let q = 4;
        let sym_a = crate::symbolize::symbolize_matrix(pair.a.view(), q).unwrap();
        let sym_b = crate::symbolize::symbolize_matrix(pair.b.view(), q).unwrap();
        let mi = crate::infotheory::mutual_information(&sym_a.columns[0], &sym_b.columns[1])
            .unwrap();
        let null = crate::nullmodels::gamma_null(q, q, pair.rows()).unwrap();
        let thr = crate::nullmodels::gamma_quantile(&null, 1.0 - 0.01 / 4.0).unwrap();
        assert!(mi > thr, "mi {mi} <= threshold {thr}");
    }

    #[test]
    fn zero_lag_coupling_rejected() {
        let spec = SynthSpec {
            couplings: vec![Coupling {
                source: 0,
                target: 0,
                lag: 0,
                strength: 0.5,
                kind: CouplingKind::Linear,
            }],
            ..iid_spec(2, 100, 1)
        };
        assert!(matches!(gen_coupled(&spec), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn zero_strength_behaves_like_iid() {
        let spec = SynthSpec {
            couplings: vec![Coupling {
                source: 0,
                target: 1,
                lag: 1,
                strength: 0.0,
                kind: CouplingKind::Linear,
            }],
            ..iid_spec(2, 2000, 23)
        };
        let (p, _) = gen_coupled(&spec).unwrap();
        let iid = gen_iid(&iid_spec(2, 2000, 23)).unwrap();
        assert_eq!(p.prices, iid.prices);
    }

    #[test]
    fn day_structure_labels() {
        let spec = SynthSpec {
            day_length: 100,
            ..iid_spec(1, 250, 3)
        };
        let p = gen_iid(&spec).unwrap();
        assert_eq!(p.day_index[0], 0);
        assert_eq!(p.day_index[99], 0);
        assert_eq!(p.day_index[100], 1);
        assert_eq!(p.day_index[249], 2);
    }
}
