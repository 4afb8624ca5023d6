//! Sybil verdicts from matchings or RSSI statistics, plus scoring.
//!
//! Detectors consume only [`ObservedEntry`] views, which carry no ground
//! truth; scoring is done separately against the full tables.

use crate::geometry::NodeId;
use crate::matcher::{self, Assignment, BalanceMode, MatcherError};
use crate::sensing::{NeighborTable, ObservedEntry, CHAR_DISTANCE, CHAR_SPEED, K_F};
use crate::similarity::{build_cost_matrix, dynamic_weights, MixtureMode, WeightVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Matcher(#[from] MatcherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    Hungarian,
    #[default]
    Balanced,
}

/// Knobs shared by the matching detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingConfig {
    pub solver: SolverChoice,
    /// Local-search pass budget for the balanced solver.
    pub solver_budget: usize,
    pub balance_mode: BalanceMode,
    pub mixture_mode: MixtureMode,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            solver: SolverChoice::Balanced,
            solver_budget: 200,
            balance_mode: BalanceMode::default(),
            mixture_mode: MixtureMode::default(),
        }
    }
}

/// Which single characteristic an ablation detector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleCharacteristic {
    Distance,
    Velocity,
}

/// One receiver's accusation for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub receiver: NodeId,
    pub epoch: usize,
    pub accused: Vec<NodeId>,
}

/// Verdict plus the VD-to-AD identity pairs the matching produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub verdict: Verdict,
    /// (VD track identity, matched AD identity) per real VD row.
    pub pairs: Vec<(NodeId, NodeId)>,
    /// Set when K_a < K_v: VD sees nodes AD cannot hear, the count premise
    /// is violated and no accusation is made.
    pub premise_violated: bool,
}

fn solve(
    costs: &crate::similarity::CostMatrix,
    cfg: &MatchingConfig,
) -> Result<Assignment, MatcherError> {
    match cfg.solver {
        SolverChoice::Exact => matcher::solve_exact(costs, cfg.balance_mode),
        SolverChoice::Hungarian => Ok(matcher::solve_hungarian(costs)),
        SolverChoice::Balanced => Ok(matcher::solve_balanced(
            costs,
            cfg.solver_budget,
            cfg.balance_mode,
        )),
    }
}

fn detect_matching(
    vd: &[ObservedEntry<'_>],
    ad: &[ObservedEntry<'_>],
    weights: &WeightVector,
    receiver: NodeId,
    epoch: usize,
    cfg: &MatchingConfig,
) -> Result<MatchOutcome, DetectError> {
    if ad.len() < vd.len() {
        return Ok(MatchOutcome {
            verdict: Verdict {
                receiver,
                epoch,
                accused: Vec::new(),
            },
            pairs: Vec::new(),
            premise_violated: true,
        });
    }
    let costs = build_cost_matrix(vd, ad, weights, cfg.mixture_mode);
    let assignment = solve(&costs, cfg)?;
    let pairs = (0..vd.len())
        .map(|i| (vd[i].identity, ad[assignment.row_to_col[i]].identity))
        .collect();
    let accused = assignment
        .unmatched_columns(vd.len())
        .into_iter()
        .map(|col| ad[col].identity)
        .collect();
    Ok(MatchOutcome {
        verdict: Verdict {
            receiver,
            epoch,
            accused,
        },
        pairs,
        premise_violated: false,
    })
}

/// VA-matching detector with dynamic weights: unmatched AD identities are
/// accused, so the accusation count is exactly `K_a - K_v`.
pub fn detect_va(
    vd: &[ObservedEntry<'_>],
    ad: &[ObservedEntry<'_>],
    receiver: NodeId,
    epoch: usize,
    cfg: &MatchingConfig,
) -> Result<MatchOutcome, DetectError> {
    let weights = dynamic_weights(ad, K_F, cfg.mixture_mode);
    detect_matching(vd, ad, &weights, receiver, epoch, cfg)
}

/// Single-characteristic ablation: the weight vector is the indicator of the
/// chosen characteristic.
pub fn detect_va_single(
    vd: &[ObservedEntry<'_>],
    ad: &[ObservedEntry<'_>],
    which: SingleCharacteristic,
    receiver: NodeId,
    epoch: usize,
    cfg: &MatchingConfig,
) -> Result<MatchOutcome, DetectError> {
    let selected = match which {
        SingleCharacteristic::Distance => CHAR_DISTANCE,
        SingleCharacteristic::Velocity => CHAR_SPEED,
    };
    let weights = WeightVector::indicator(K_F, selected);
    detect_matching(vd, ad, &weights, receiver, epoch, cfg)
}

/// RSSI baseline: single-linkage clustering of AD identities by ranging
/// estimate; every cluster of two or more identities is accused entirely
/// (one transmitter produces one received-power signature).
pub fn detect_rssi(
    ad: &[ObservedEntry<'_>],
    epsilon_m: f64,
    receiver: NodeId,
    epoch: usize,
) -> Verdict {
    let mut ranged: Vec<(f64, NodeId)> = ad
        .iter()
        .filter_map(|e| e.ranging.map(|r| (r, e.identity)))
        .collect();
    ranged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut accused = Vec::new();
    let mut start = 0;
    for i in 1..=ranged.len() {
        let chain_broken = i == ranged.len() || ranged[i].0 - ranged[i - 1].0 > epsilon_m;
        if chain_broken {
            if i - start >= 2 {
                accused.extend(ranged[start..i].iter().map(|&(_, id)| id));
            }
            start = i;
        }
    }
    Verdict {
        receiver,
        epoch,
        accused,
    }
}

/// Pooled detection counts and matching statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub matched_correct: u64,
    pub matched_total: u64,
}

impl DetectionReport {
    /// TP/(TP+FP); 1 when nothing was accused.
    pub fn precision(&self) -> f64 {
        let denom = self.tp + self.fp;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    /// TP/(TP+FN); 1 when no Sybil was present.
    pub fn recall(&self) -> f64 {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    /// Correctly matched VD rows over all VD rows; 1 when no matching
    /// samples exist (degenerate denominator convention).
    pub fn matching_accuracy(&self) -> f64 {
        if self.matched_total == 0 {
            1.0
        } else {
            self.matched_correct as f64 / self.matched_total as f64
        }
    }

    pub fn merge(&mut self, other: &DetectionReport) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.matched_correct += other.matched_correct;
        self.matched_total += other.matched_total;
    }
}

/// Scores one verdict (and optional matching pairs) against the ground
/// truth carried by the full AD table.
pub fn score(
    verdict: &Verdict,
    ad_table: &NeighborTable,
    pairs: Option<&[(NodeId, NodeId)]>,
) -> DetectionReport {
    let mut report = DetectionReport::default();
    for entry in &ad_table.entries {
        let accused = verdict.accused.contains(&entry.identity);
        match (entry.truth.is_sybil, accused) {
            (true, true) => report.tp += 1,
            (true, false) => report.fn_ += 1,
            (false, true) => report.fp += 1,
            (false, false) => {}
        }
    }
    if let Some(pairs) = pairs {
        report.matched_total = pairs.len() as u64;
        for &(vd_id, ad_id) in pairs {
            let correct = ad_table
                .entries
                .iter()
                .any(|e| e.identity == ad_id && !e.truth.is_sybil && e.truth.physical == vd_id);
            if correct {
                report.matched_correct += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{
        Domain, GaussianObservation as Obs, GroundTruth, NeighborEntry, NeighborTable,
    };

    fn entry(id: u64, d: f64, v: f64, sybil_of: Option<u64>, ranging: Option<f64>) -> NeighborEntry {
        NeighborEntry {
            identity: NodeId(id),
            characteristics: vec![Obs::new(d, 1.0), Obs::new(v, 0.01)],
            ranging,
            truth: GroundTruth {
                physical: NodeId(sybil_of.unwrap_or(id)),
                is_sybil: sybil_of.is_some(),
            },
        }
    }

    fn table(domain: Domain, entries: Vec<NeighborEntry>) -> NeighborTable {
        NeighborTable { domain, entries }
    }

    #[test]
    fn clean_equal_tables_accuse_nobody() {
        let mk = |dom| {
            table(
                dom,
                vec![
                    entry(1, 10.0, 3.0, None, Some(10.0)),
                    entry(2, 40.0, 7.0, None, Some(40.0)),
                ],
            )
        };
        let vd = mk(Domain::Vd);
        let ad = mk(Domain::Ad);
        let out = detect_va(
            &vd.observed(),
            &ad.observed(),
            NodeId(0),
            0,
            &MatchingConfig::default(),
        )
        .unwrap();
        assert!(out.verdict.accused.is_empty());
        assert!(!out.premise_violated);
        assert_eq!(
            out.pairs,
            vec![(NodeId(1), NodeId(1)), (NodeId(2), NodeId(2))]
        );
    }

    #[test]
    fn sybils_are_the_unmatched_identities() {
        // 4 legitimate neighbors + 1 malicious with 10 Sybils, low noise.
        let mut ad_entries = Vec::new();
        let mut vd_entries = Vec::new();
        for (i, d) in [20.0, 55.0, 90.0, 130.0, 160.0].iter().enumerate() {
            let id = i as u64 + 1;
            let v = 3.0 + 2.0 * i as f64;
            ad_entries.push(entry(id, *d, v, None, Some(*d)));
            vd_entries.push(entry(id, *d + 0.1, v + 0.02, None, None));
        }
        for k in 0..10u64 {
            // Sybil claims scattered over distinct kinematics, owned by node 5.
            ad_entries.push(entry(
                100 + k,
                31.0 + 13.0 * k as f64,
                1.0 + 0.9 * k as f64,
                Some(5),
                Some(160.0),
            ));
        }
        let ad = table(Domain::Ad, ad_entries);
        let vd = table(Domain::Vd, vd_entries);
        let out = detect_va(
            &vd.observed(),
            &ad.observed(),
            NodeId(0),
            3,
            &MatchingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.verdict.accused.len(), 10);
        assert!(out.verdict.accused.iter().all(|id| id.0 >= 100));
        let report = score(&out.verdict, &ad, Some(&out.pairs));
        assert_eq!(report.tp, 10);
        assert_eq!(report.fp, 0);
        assert_eq!(report.fn_, 0);
        assert_eq!(report.matched_correct, 5);
    }

    #[test]
    fn accusation_count_is_table_size_difference() {
        let ad = table(
            Domain::Ad,
            vec![
                entry(1, 10.0, 3.0, None, Some(10.0)),
                entry(2, 40.0, 7.0, None, Some(40.0)),
                entry(3, 70.0, 9.0, None, Some(70.0)),
            ],
        );
        let vd = table(Domain::Vd, vec![entry(1, 10.0, 3.0, None, None)]);
        let out = detect_va(
            &vd.observed(),
            &ad.observed(),
            NodeId(0),
            0,
            &MatchingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.verdict.accused.len(), 2);
    }

    #[test]
    fn premise_violation_yields_empty_flagged_verdict() {
        let vd = table(
            Domain::Vd,
            vec![
                entry(1, 10.0, 3.0, None, None),
                entry(2, 40.0, 7.0, None, None),
            ],
        );
        let ad = table(Domain::Ad, vec![entry(1, 10.0, 3.0, None, Some(10.0))]);
        let out = detect_va(
            &vd.observed(),
            &ad.observed(),
            NodeId(0),
            0,
            &MatchingConfig::default(),
        )
        .unwrap();
        assert!(out.premise_violated);
        assert!(out.verdict.accused.is_empty());
    }

    #[test]
    fn single_characteristic_matches_va_on_single_neighbor() {
        let ad = table(Domain::Ad, vec![entry(1, 10.0, 3.0, None, Some(10.0))]);
        let vd = table(Domain::Vd, vec![entry(1, 10.0, 3.0, None, None)]);
        let cfg = MatchingConfig::default();
        let full = detect_va(&vd.observed(), &ad.observed(), NodeId(0), 0, &cfg).unwrap();
        let dist = detect_va_single(
            &vd.observed(),
            &ad.observed(),
            SingleCharacteristic::Distance,
            NodeId(0),
            0,
            &cfg,
        )
        .unwrap();
        assert_eq!(full.verdict, dist.verdict);
        assert_eq!(full.pairs, dist.pairs);
    }

    #[test]
    fn rssi_clusters_equidistant_identities() {
        // Two legitimate neighbors at nearly the same range: both falsely
        // accused. A lone third neighbor stays clear.
        let ad = table(
            Domain::Ad,
            vec![
                entry(1, 50.0, 3.0, None, Some(50.0)),
                entry(2, 51.0, 8.0, None, Some(51.0)),
                entry(3, 120.0, 5.0, None, Some(120.0)),
            ],
        );
        let v = detect_rssi(&ad.observed(), 3.0, NodeId(0), 0);
        assert_eq!(v.accused, vec![NodeId(1), NodeId(2)]);
        let report = score(&v, &ad, None);
        assert_eq!((report.tp, report.fp, report.fn_), (0, 2, 0));
    }

    #[test]
    fn rssi_finds_the_sybil_cluster() {
        let mut entries = vec![
            entry(1, 20.0, 3.0, None, Some(20.0)),
            entry(2, 90.0, 8.0, None, Some(90.0)),
        ];
        for k in 0..10u64 {
            entries.push(entry(
                100 + k,
                40.0,
                4.0,
                Some(7),
                Some(55.0 + 0.2 * k as f64),
            ));
        }
        let ad = table(Domain::Ad, entries);
        let v = detect_rssi(&ad.observed(), 3.0, NodeId(0), 0);
        assert_eq!(v.accused.len(), 10);
        let report = score(&v, &ad, None);
        assert_eq!((report.tp, report.fp, report.fn_), (10, 0, 0));
    }

    #[test]
    fn rssi_zero_epsilon_accuses_nobody_without_ties() {
        let ad = table(
            Domain::Ad,
            vec![
                entry(1, 50.0, 3.0, None, Some(50.0)),
                entry(2, 50.5, 8.0, None, Some(50.5)),
            ],
        );
        let v = detect_rssi(&ad.observed(), 0.0, NodeId(0), 0);
        assert!(v.accused.is_empty());
    }

    #[test]
    fn rssi_never_accuses_singletons() {
        let ad = table(
            Domain::Ad,
            vec![
                entry(1, 10.0, 3.0, None, Some(10.0)),
                entry(2, 50.0, 8.0, None, Some(50.0)),
                entry(3, 90.0, 5.0, None, Some(90.0)),
            ],
        );
        let v = detect_rssi(&ad.observed(), 3.0, NodeId(0), 0);
        assert!(v.accused.is_empty());
    }

    #[test]
    fn report_arithmetic() {
        let r = DetectionReport {
            tp: 8,
            fp: 2,
            fn_: 2,
            matched_correct: 0,
            matched_total: 0,
        };
        assert_eq!(r.precision(), 0.8);
        assert_eq!(r.recall(), 0.8);
        let empty = DetectionReport::default();
        assert_eq!(empty.precision(), 1.0);
        assert_eq!(empty.recall(), 1.0);
        assert_eq!(empty.matching_accuracy(), 1.0);
    }
}
