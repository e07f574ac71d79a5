//! Multiple-testing corrections, link validation and lag sweeps.

use serde::{Deserialize, Serialize};

use crate::marketdata::{build_lagged_pair, ReturnMatrix};
use crate::nullmodels::{
    self, gamma_null, mi_pvalue, ShuffleConfig, ShuffleMode, Statistic, SurrogateCounts,
};
use crate::symbolize::symbolize_matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    Bonferroni,
    Fdr,
    None,
}

impl std::fmt::Display for Correction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Correction::Bonferroni => write!(f, "bonferroni"),
            Correction::Fdr => write!(f, "fdr"),
            Correction::None => write!(f, "none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gamma,
    Shuffle,
}

/// How the test count for corrections is derived from the asset count.
/// The reference procedure uses N² even though self-pairs are excluded
/// from networks; ordered-pair counting (N·(N−1)) is also supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestCount {
    NSquared,
    OrderedPairs,
}

impl TestCount {
    pub fn count(&self, n_assets: usize) -> usize {
        match self {
            TestCount::NSquared => n_assets * n_assets,
            TestCount::OrderedPairs => n_assets * (n_assets - 1),
        }
    }
}

/// Score of one ordered pair (from, to) at a given lag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairScore {
    pub from: String,
    pub to: String,
    pub lambda: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// Validated links with direction; edge m→n means the past of m shares
/// information with the future of n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectedNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub correction: Correction,
    pub p_nominal: f64,
    pub lambda: usize,
}

impl DirectedNetwork {
    pub fn edge_set(&self) -> std::collections::BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| (e.from.clone(), e.to.clone()))
            .collect()
    }
}

pub fn bonferroni_threshold(p: f64, n_tests: usize) -> f64 {
    p / n_tests as f64
}

/// Step-up FDR selection: the k smallest p-values where k is the largest
/// index with p_k < k·p/n_tests (strict inequality). Returns indices
/// into the input slice.
pub fn fdr_select(p_values: &[f64], p: f64, n_tests: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p_values.len()).collect();
    order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).unwrap());
    let base = p / n_tests as f64;
    let mut k = 0;
    for (rank, &idx) in order.iter().enumerate() {
        if p_values[idx] < (rank as f64 + 1.0) * base {
            k = rank + 1;
        }
    }
    order.truncate(k);
    order
}

/// Filter all-ordered-pair scores into a directed network under the
/// requested correction. Self-pairs are never admitted as edges.
pub fn validate_links(
    nodes: &[String],
    scores: &[PairScore],
    p_nominal: f64,
    correction: Correction,
    test_count: TestCount,
    lambda: usize,
) -> DirectedNetwork {
    let n_tests = test_count.count(nodes.len());
    let candidates: Vec<&PairScore> = scores.iter().filter(|s| s.from != s.to).collect();
    let selected: Vec<&PairScore> = match correction {
        Correction::Bonferroni => {
            let thr = bonferroni_threshold(p_nominal, n_tests);
            candidates
                .iter()
                .filter(|s| s.p_value < thr)
                .copied()
                .collect()
        }
        Correction::Fdr => {
            let ps: Vec<f64> = candidates.iter().map(|s| s.p_value).collect();
            fdr_select(&ps, p_nominal, n_tests)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        }
        Correction::None => candidates
            .iter()
            .filter(|s| s.p_value < p_nominal)
            .copied()
            .collect(),
    };
    let mut edges: Vec<Edge> = selected
        .into_iter()
        .map(|s| Edge {
            from: s.from.clone(),
            to: s.to.clone(),
            statistic: s.statistic,
            p_value: s.p_value,
        })
        .collect();
    edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    DirectedNetwork {
        nodes: nodes.to_vec(),
        edges,
        correction,
        p_nominal,
        lambda,
    }
}

/// True iff every edge of `a` is present in `b`.
pub fn is_subnetwork(a: &DirectedNetwork, b: &DirectedNetwork) -> Result<bool> {
    let mut na = a.nodes.clone();
    let mut nb = b.nodes.clone();
    na.sort();
    nb.sort();
    if na != nb {
        return Err(Error::NodeSetMismatch);
    }
    let bset = b.edge_set();
    Ok(a.edges
        .iter()
        .all(|e| bset.contains(&(e.from.clone(), e.to.clone()))))
}

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub q: usize,
    pub method: Method,
    pub n_shuffles: usize,
    pub seed: u64,
}

/// Score every ordered pair (m, n) of a return matrix at lag `lambda`.
/// Self-pairs are scored too (lagged autocorrelation diagnostics) but
/// are excluded from networks downstream.
pub fn score_pairs(r: &ReturnMatrix, lambda: usize, cfg: &ScoreConfig) -> Result<Vec<PairScore>> {
    let pair = build_lagged_pair(r, lambda)?;
    let t = pair.rows();
    let sym_a = symbolize_matrix(pair.a.view(), cfg.q)?;
    let sym_b = symbolize_matrix(pair.b.view(), cfg.q)?;
    let mi = nullmodels::mi_matrix(&sym_a, &sym_b);
    let n_assets = pair.n_assets();

    let surrogate: Option<SurrogateCounts> = match cfg.method {
        Method::Gamma => None,
        Method::Shuffle => Some(nullmodels::shuffle_surrogates(
            &pair,
            &ShuffleConfig {
                statistic: Statistic::Mi,
                n_shuffles: cfg.n_shuffles,
                seed: cfg.seed,
                mode: ShuffleMode::Rows,
                q: cfg.q,
            },
        )?),
    };
    let null = gamma_null(cfg.q, cfg.q, t)?;

    let mut scores = Vec::with_capacity(n_assets * n_assets);
    for m in 0..n_assets {
        for n in 0..n_assets {
            let stat = mi[[m, n]];
            let p_value = match &surrogate {
                None => mi_pvalue(&null, stat)?,
                Some(counts) => counts.upper_pvalue(m, n),
            };
            scores.push(PairScore {
                from: r.symbols[m].clone(),
                to: r.symbols[n].clone(),
                lambda,
                statistic: stat,
                p_value,
            });
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagSweepResult {
    pub lambdas: Vec<usize>,
    pub count_bonferroni: Vec<usize>,
    pub count_fdr: Vec<usize>,
    /// lags skipped because no day was long enough
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub q: usize,
    pub p_nominal: f64,
    pub method: Method,
    pub n_shuffles: usize,
    pub seed: u64,
    pub test_count: TestCount,
}

/// For each lag: build the lagged pair, symbolize, score all ordered
/// pairs and count validated edges under both corrections.
pub fn lag_sweep(r: &ReturnMatrix, lambdas: &[usize], cfg: &SweepConfig) -> Result<LagSweepResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument {
            msg: "empty lag list".into(),
        });
    }
    let mut result = LagSweepResult {
        lambdas: Vec::new(),
        count_bonferroni: Vec::new(),
        count_fdr: Vec::new(),
        skipped: Vec::new(),
    };
    for &lambda in lambdas {
        let score_cfg = ScoreConfig {
            q: cfg.q,
            method: cfg.method,
            n_shuffles: cfg.n_shuffles,
            seed: cfg.seed.wrapping_add(lambda as u64),
        };
        let scores = match score_pairs(r, lambda, &score_cfg) {
            Ok(s) => s,
            Err(Error::EmptyLaggedPair { .. }) => {
                result.skipped.push(lambda);
                continue;
            }
            Err(e) => return Err(e),
        };
        let bonf = validate_links(
            &r.symbols,
            &scores,
            cfg.p_nominal,
            Correction::Bonferroni,
            cfg.test_count,
            lambda,
        );
        let fdr = validate_links(
            &r.symbols,
            &scores,
            cfg.p_nominal,
            Correction::Fdr,
            cfg.test_count,
            lambda,
        );
        debug_assert!(is_subnetwork(&bonf, &fdr).unwrap());
        result.lambdas.push(lambda);
        result.count_bonferroni.push(bonf.edges.len());
        result.count_fdr.push(fdr.edges.len());
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni_threshold(0.01, 100 * 100), 1e-6);
        assert_eq!(bonferroni_threshold(0.01, 1), 0.01);
        assert_eq!(bonferroni_threshold(0.05, 100), 5e-4);
    }

    #[test]
    fn fdr_single_strong_rejection() {
        assert_eq!(fdr_select(&[1e-9], 0.01, 10_000), vec![0]);
    }

    #[test]
    fn fdr_nothing_near_threshold() {
        assert!(fdr_select(&[0.5, 0.6], 0.01, 4).is_empty());
    }

    #[test]
    fn fdr_strict_inequality_at_boundary() {
        // p_2 = 2e-6 ties the k=2 threshold exactly and is rejected,
        // leaving only the k=1 acceptance
        let accepted = fdr_select(&[1e-7, 2e-6, 0.9], 0.01, 10_000);
        assert_eq!(accepted, vec![0]);
    }

    #[test]
    fn fdr_step_up_rescues_smaller_ps() {
        // k=3 passes even though k=2 fails, so all three are accepted
        let ps = [0.9e-6, 2.5e-6, 2.9e-6];
        let accepted = fdr_select(&ps, 0.01, 10_000);
        assert_eq!(accepted.len(), 3);
    }

    fn score(from: &str, to: &str, p: f64) -> PairScore {
        PairScore {
            from: from.into(),
            to: to.into(),
            lambda: 1,
            statistic: 0.1,
            p_value: p,
        }
    }

    fn all_pair_scores(nodes: &[&str], p: f64) -> Vec<PairScore> {
        let mut v = Vec::new();
        for a in nodes {
            for b in nodes {
                v.push(score(a, b, p));
            }
        }
        v
    }

    #[test]
    fn all_ones_empty_network() {
        let nodes: Vec<String> = vec!["A".into(), "B".into()];
        let scores = all_pair_scores(&["A", "B"], 1.0);
        for corr in [Correction::Bonferroni, Correction::Fdr] {
            let net = validate_links(&nodes, &scores, 0.01, corr, TestCount::NSquared, 1);
            assert!(net.edges.is_empty());
        }
    }

    #[test]
    fn zero_p_single_edge_under_both_corrections() {
        let nodes: Vec<String> = vec!["A".into(), "B".into()];
        let mut scores = all_pair_scores(&["A", "B"], 1.0);
        scores.push(score("A", "B", 0.0));
        for corr in [Correction::Bonferroni, Correction::Fdr] {
            let net = validate_links(&nodes, &scores, 0.01, corr, TestCount::NSquared, 1);
            assert_eq!(net.edges.len(), 1);
            assert_eq!(net.edges[0].from, "A");
            assert_eq!(net.edges[0].to, "B");
        }
    }

    #[test]
    fn self_pairs_never_become_edges() {
        let nodes: Vec<String> = vec!["A".into(), "B".into()];
        let scores = vec![score("A", "A", 0.0), score("B", "B", 0.0)];
        let net = validate_links(
            &nodes,
            &scores,
            0.01,
            Correction::Bonferroni,
            TestCount::NSquared,
            1,
        );
        assert!(net.edges.is_empty());
    }

    #[test]
    fn validation_invariant_under_input_order() {
        let nodes: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let mut scores = vec![
            score("C", "A", 1e-9),
            score("A", "B", 1e-8),
            score("B", "C", 0.9),
        ];
        let net1 = validate_links(
            &nodes,
            &scores,
            0.01,
            Correction::Fdr,
            TestCount::NSquared,
            1,
        );
        scores.reverse();
        let net2 = validate_links(
            &nodes,
            &scores,
            0.01,
            Correction::Fdr,
            TestCount::NSquared,
            1,
        );
        assert_eq!(net1.edges, net2.edges);
    }

    #[test]
    fn edge_set_monotone_in_nominal_p() {
        let nodes: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let scores = vec![
            score("A", "B", 1e-7),
            score("B", "C", 5e-7),
            score("C", "A", 1e-4),
        ];
        for corr in [Correction::Bonferroni, Correction::Fdr] {
            let mut prev = usize::MAX;
            for p in [0.05, 0.01, 0.001, 1e-4] {
                let net = validate_links(&nodes, &scores, p, corr, TestCount::NSquared, 1);
                assert!(net.edges.len() <= prev);
                prev = net.edges.len();
            }
        }
    }

    #[test]
    fn bonferroni_subset_of_fdr_on_random_scores() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let names: Vec<String> = (0..6).map(|i| format!("S{i}")).collect();
        for _ in 0..50 {
            let mut scores = Vec::new();
            for a in &names {
                for b in &names {
                    let p: f64 = if rng.gen_bool(0.2) {
                        10f64.powf(-rng.gen_range(3.0..9.0))
                    } else {
                        rng.gen()
                    };
                    scores.push(score(a, b, p));
                }
            }
            let bonf = validate_links(
                &names,
                &scores,
                0.01,
                Correction::Bonferroni,
                TestCount::NSquared,
                0,
            );
            let fdr = validate_links(
                &names,
                &scores,
                0.01,
                Correction::Fdr,
                TestCount::NSquared,
                0,
            );
            assert!(is_subnetwork(&bonf, &fdr).unwrap());
        }
    }

    #[test]
    fn subnetwork_basics() {
        let nodes: Vec<String> = vec!["A".into(), "B".into()];
        let empty = DirectedNetwork {
            nodes: nodes.clone(),
            edges: vec![],
            correction: Correction::Bonferroni,
            p_nominal: 0.01,
            lambda: 0,
        };
        let one = DirectedNetwork {
            nodes: nodes.clone(),
            edges: vec![Edge {
                from: "A".into(),
                to: "B".into(),
                statistic: 0.2,
                p_value: 1e-9,
            }],
            correction: Correction::Fdr,
            p_nominal: 0.01,
            lambda: 0,
        };
        assert!(is_subnetwork(&empty, &one).unwrap());
        assert!(is_subnetwork(&one, &one).unwrap());
        assert!(!is_subnetwork(&one, &empty).unwrap());
        let other = DirectedNetwork {
            nodes: vec!["A".into(), "C".into()],
            ..empty.clone()
        };
        assert!(is_subnetwork(&empty, &other).is_err());
    }

    #[test]
    fn empty_lambda_list_is_error() {
        let r = ReturnMatrix {
            symbols: vec!["A".into()],
            day_index: vec![0; 10],
            returns: ndarray::Array2::zeros((10, 1)),
            tau: 1,
        };
        let cfg = SweepConfig {
            q: 4,
            p_nominal: 0.01,
            method: Method::Gamma,
            n_shuffles: 0,
            seed: 0,
            test_count: TestCount::NSquared,
        };
        assert!(lag_sweep(&r, &[], &cfg).is_err());
    }

    #[test]
    fn infeasible_lambda_skipped() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let returns =
            ndarray::Array2::from_shape_fn((8, 2), |_| rng.gen::<f64>() - 0.5);
        let r = ReturnMatrix {
            symbols: vec!["A".into(), "B".into()],
            day_index: vec![0, 0, 0, 0, 1, 1, 1, 1],
            returns,
            tau: 1,
        };
        let cfg = SweepConfig {
            q: 2,
            p_nominal: 0.01,
            method: Method::Gamma,
            n_shuffles: 0,
            seed: 0,
            test_count: TestCount::NSquared,
        };
        let sweep = lag_sweep(&r, &[0, 1, 9], &cfg).unwrap();
        assert_eq!(sweep.lambdas, vec![0, 1]);
        assert_eq!(sweep.skipped, vec![9]);
    }
}
