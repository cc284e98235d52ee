use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use super::{CuffWeights, LaminateError, PantsFlow, QUANTA_PER_UNIT};
use crate::network::{EdgeId, VertexId};

/// Scalar carried by a train track. `i128` quanta keep every halving exact
/// when the per-pant totals are even, which conservation guarantees.
pub trait TrackWeight: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Debug {
    const ZERO: Self;
    /// `self / 2` when it is exact.
    fn half(self) -> Option<Self>;
    fn to_f64(self) -> f64;
    fn admissible(self) -> bool;
}

impl TrackWeight for f64 {
    const ZERO: f64 = 0.0;
    fn half(self) -> Option<f64> {
        let h = self * 0.5;
        (h + h == self).then_some(h)
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn admissible(self) -> bool {
        self.is_finite() && self >= 0.0
    }
}

impl TrackWeight for i128 {
    const ZERO: i128 = 0;
    fn half(self) -> Option<i128> {
        (self % 2 == 0).then_some(self / 2)
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn admissible(self) -> bool {
        self >= 0
    }
}

/// Weight on the connector joining cuffs `i` and `j` of one pant (0-based);
/// `i == j` is a self-connector with both feet on cuff `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connector<W> {
    pub i: u8,
    pub j: u8,
    pub weight: W,
}

fn connector<W>(i: usize, j: usize, weight: W) -> Connector<W> {
    Connector {
        i: i as u8,
        j: j as u8,
        weight,
    }
}

/// Connector weights inside one pant whose cuffs carry `t`. Three values give
/// an ordinary pant, two a pant with a puncture.
///
/// When the triangle inequalities hold the weights are `½(t₁+t₃−t₂)` on
/// `{1,3}`, `½(t₁+t₂−t₃)` on `{1,2}` and `½(t₂+t₃−t₁)` on `{2,3}`. If the
/// largest value `t_k` exceeds the sum of the other two, each smaller cuff
/// runs entirely to cuff `k` and the excess closes up in a self-connector of
/// weight `½(t_k − t_i − t_j)`. A punctured pant sends the smaller value
/// across and closes the rest on the larger cuff.
pub fn pant_track_weights<W: TrackWeight>(t: &[W]) -> Result<Vec<Connector<W>>, LaminateError> {
    if let Some(bad) = t.iter().find(|w| !w.admissible()) {
        return Err(LaminateError::NegativeInput(bad.to_f64()));
    }
    let half = |w: W| w.half().ok_or(LaminateError::InexactHalf);
    match *t {
        [a, b] => {
            let (small, large, k) = if a <= b { (a, b, 1) } else { (b, a, 0) };
            Ok(vec![
                connector(0, 1, small),
                connector(k, k, half(large - small)?),
            ])
        }
        [t1, t2, t3] => {
            let k = if t1 >= t2 && t1 >= t3 {
                0
            } else if t2 >= t3 {
                1
            } else {
                2
            };
            let (i, j) = match k {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            if t[k] <= t[i] + t[j] {
                Ok(vec![
                    connector(0, 2, half(t1 + t3 - t2)?),
                    connector(0, 1, half(t1 + t2 - t3)?),
                    connector(1, 2, half(t2 + t3 - t1)?),
                ])
            } else {
                Ok(vec![
                    connector(i, k, t[i]),
                    connector(j, k, t[j]),
                    connector(k, k, half(t[k] - t[i] - t[j])?),
                ])
            }
        }
        _ => Err(LaminateError::CuffCount(t.len())),
    }
}

/// Total connector weight landing on each cuff, self-connectors twice.
pub fn cuff_totals<W: TrackWeight>(connectors: &[Connector<W>], cuffs: usize) -> Vec<W> {
    let mut total = vec![W::ZERO; cuffs];
    for c in connectors {
        total[c.i as usize] = total[c.i as usize] + c.weight;
        total[c.j as usize] = total[c.j as usize] + c.weight;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    One,
    Two,
}

/// Direction in which a connector merges into the cuff, seen from its own
/// side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tangency {
    Right,
    Left,
}

/// A connector foot on a cuff, listed in counterclockwise order as seen from
/// side one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Foot<W> {
    pub side: Side,
    pub tangency: Tangency,
    pub weight: W,
}

impl<W> Foot<W> {
    pub fn right(side: Side, weight: W) -> Self {
        Foot {
            side,
            tangency: Tangency::Right,
            weight,
        }
    }

    fn raises(&self) -> bool {
        matches!(
            (self.side, self.tangency),
            (Side::One, Tangency::Right) | (Side::Two, Tangency::Left)
        )
    }
}

/// Smallest arc weights around a cuff. `arcs[k]` is the arc leaving foot `k`;
/// crossing a foot that merges forward adds its weight and one that merges
/// backward removes it. The result is shifted so the lightest arc is 0.
pub fn cuff_arc_weights<W: TrackWeight>(feet: &[Foot<W>]) -> Result<Vec<W>, LaminateError> {
    if let Some(bad) = feet.iter().find(|f| !f.weight.admissible()) {
        return Err(LaminateError::NegativeInput(bad.weight.to_f64()));
    }
    let side_sum = |side: Side| {
        feet.iter()
            .filter(|f| f.side == side)
            .fold(W::ZERO, |acc, f| acc + f.weight)
    };
    let (one, two) = (side_sum(Side::One), side_sum(Side::Two));
    if one != two {
        return Err(LaminateError::SideImbalance {
            side_one: one.to_f64(),
            side_two: two.to_f64(),
        });
    }
    if feet.is_empty() {
        return Ok(Vec::new());
    }
    // prefix sums as (gained, lost) to stay nonnegative
    let mut gained = W::ZERO;
    let mut lost = W::ZERO;
    let mut prefix = Vec::with_capacity(feet.len());
    for f in feet {
        if f.raises() {
            gained = gained + f.weight;
        } else {
            lost = lost + f.weight;
        }
        prefix.push((gained, lost));
    }
    if gained != lost {
        return Err(LaminateError::OpenCuff);
    }
    // arc = p - min p = (g - l) - (g* - l*) = (g + l*) - (l + g*)
    let &(g_min, l_min) = prefix
        .iter()
        .min_by(|x, y| {
            (x.0 + y.1)
                .partial_cmp(&(y.0 + x.1))
                .expect("ordered weights")
        })
        .expect("nonempty");
    Ok(prefix
        .iter()
        .map(|&(g, l)| (g + l_min) - (l + g_min))
        .collect())
}

/// Switch condition at every foot and a zero-weight arc.
pub fn switch_conditions_hold<W: TrackWeight>(feet: &[Foot<W>], arcs: &[W]) -> bool {
    if feet.len() != arcs.len() {
        return false;
    }
    if arcs.is_empty() {
        return true;
    }
    let n = arcs.len();
    let balanced = (0..n).all(|k| {
        let before = arcs[(k + n - 1) % n];
        if feet[k].raises() {
            before + feet[k].weight == arcs[k]
        } else {
            arcs[k] + feet[k].weight == before
        }
    });
    balanced && arcs.iter().any(|&a| a == W::ZERO) && arcs.iter().all(|a| a.admissible())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PantTrack {
    /// Cuff `i` of the pant is edge `cuffs[i]`.
    pub cuffs: Vec<EdgeId>,
    pub connectors: Vec<Connector<i128>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuffTrack {
    pub edge: EdgeId,
    /// `u(e)` in quanta.
    pub flow: i128,
    pub feet: Vec<Foot<i128>>,
    pub arcs: Vec<i128>,
}

impl CuffTrack {
    pub fn max_arc(&self) -> i128 {
        self.arcs.iter().copied().max().unwrap_or(0)
    }
}

/// Train track carried by a flow, in quanta of `1 / QUANTA_PER_UNIT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrackWeights {
    pub quanta_per_unit: i128,
    pub pants: BTreeMap<usize, PantTrack>,
    pub cuffs: Vec<CuffTrack>,
}

impl TrainTrackWeights {
    /// Largest `max arc / u(e)` over cuffs with positive flow.
    pub fn max_arc_ratio(&self) -> f64 {
        self.cuffs
            .iter()
            .filter(|c| c.flow > 0)
            .map(|c| c.max_arc() as f64 / c.flow as f64)
            .fold(0.0, f64::max)
    }

    /// Intersection data per cuff: `i(μ, α) = u(e)` and `i(μ, β)` the
    /// heaviest arc on the cuff.
    pub fn cuff_weights(&self, flow: &PantsFlow) -> Vec<CuffWeights> {
        let scale = QUANTA_PER_UNIT as f64;
        self.cuffs
            .iter()
            .map(|c| {
                let edge = flow.network.edge(c.edge);
                let u = c.flow as f64 / scale;
                CuffWeights {
                    n: edge.level.unwrap_or(0),
                    i_alpha: u,
                    i_beta: c.max_arc() as f64 / scale,
                    length: edge.conductance,
                    energy: Some(u * u / edge.conductance),
                }
            })
            .collect()
    }
}

/// Build the train track of a flow on a pants graph: every vertex other than
/// the sink is a pant with two or three cuffs, every edge a cuff. Cuffs into
/// the sink get a single connector of weight `u(e)` on the sink side. Feet
/// are all tangent from the right, side one being the pant at `a`.
pub fn laminate_flow(flow: &PantsFlow) -> Result<TrainTrackWeights, LaminateError> {
    let net = &flow.network;
    let mut pants = BTreeMap::new();
    // feet[e] = (side one, side two)
    let mut feet: Vec<(Vec<Foot<i128>>, Vec<Foot<i128>>)> =
        vec![(Vec::new(), Vec::new()); net.edge_count()];
    for v in (0..net.vertex_count()).map(VertexId) {
        if v == flow.sink {
            continue;
        }
        let mut cuffs = Vec::new();
        for &e in net.incident(v) {
            cuffs.push(EdgeId(e));
            if net.edges()[e].is_loop() {
                cuffs.push(EdgeId(e));
            }
        }
        if !(2..=3).contains(&cuffs.len()) {
            return Err(LaminateError::NotAPant {
                vertex: v,
                degree: cuffs.len(),
            });
        }
        let t: Vec<i128> = cuffs.iter().map(|e| flow.quanta[e.0]).collect();
        let connectors = pant_track_weights(&t)?;
        for c in &connectors {
            for slot in [c.i, c.j] {
                let e = cuffs[slot as usize];
                let edge = net.edge(e);
                // the second slot of a loop is its side two
                let first_slot = cuffs.iter().position(|&x| x == e).unwrap();
                let side_one = edge.a == v && (!edge.is_loop() || slot as usize == first_slot);
                if side_one {
                    feet[e.0].0.push(Foot::right(Side::One, c.weight));
                } else {
                    feet[e.0].1.push(Foot::right(Side::Two, c.weight));
                }
            }
        }
        pants.insert(v.0, PantTrack { cuffs, connectors });
    }
    let mut cuffs = Vec::with_capacity(net.edge_count());
    for (e, (one, two)) in feet.into_iter().enumerate() {
        let edge = &net.edges()[e];
        let u = flow.quanta[e];
        let mut all = one;
        if edge.a == flow.sink {
            all.push(Foot::right(Side::One, u));
        }
        all.extend(two);
        if edge.b == flow.sink {
            all.push(Foot::right(Side::Two, u));
        }
        let arcs = cuff_arc_weights(&all)?;
        cuffs.push(CuffTrack {
            edge: EdgeId(e),
            flow: u,
            feet: all,
            arcs,
        });
    }
    Ok(TrainTrackWeights {
        quanta_per_unit: QUANTA_PER_UNIT,
        pants,
        cuffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminate::orient_flow;
    use crate::network::{ConductanceNetwork, Edge};

    fn weights(c: &[Connector<f64>]) -> Vec<((u8, u8), f64)> {
        c.iter().map(|c| ((c.i, c.j), c.weight)).collect()
    }

    #[test]
    fn triangle_case() {
        let c = pant_track_weights(&[3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            weights(&c),
            vec![((0, 2), 2.0), ((0, 1), 1.0), ((1, 2), 3.0)]
        );
        assert_eq!(cuff_totals(&c, 3), vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn degenerate_case() {
        let c = pant_track_weights(&[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(
            weights(&c),
            vec![((0, 2), 1.0), ((1, 2), 1.0), ((2, 2), 0.5)]
        );
        assert_eq!(cuff_totals(&c, 3), vec![1.0, 1.0, 3.0]);
        let c = pant_track_weights(&[6.0, 1.0, 2.0]).unwrap();
        assert_eq!(cuff_totals(&c, 3), vec![6.0, 1.0, 2.0]);
    }

    #[test]
    fn punctured_case() {
        let c = pant_track_weights(&[2.0, 5.0]).unwrap();
        assert_eq!(weights(&c), vec![((0, 1), 2.0), ((1, 1), 1.5)]);
        assert_eq!(cuff_totals(&c, 2), vec![2.0, 5.0]);
        let c = pant_track_weights(&[5.0, 2.0]).unwrap();
        assert_eq!(cuff_totals(&c, 2), vec![5.0, 2.0]);
    }

    #[test]
    fn bad_pant_inputs() {
        assert!(matches!(
            pant_track_weights(&[-1.0, 1.0, 1.0]),
            Err(LaminateError::NegativeInput(_))
        ));
        assert!(matches!(
            pant_track_weights(&[f64::NAN, 1.0]),
            Err(LaminateError::NegativeInput(_))
        ));
        assert_eq!(
            pant_track_weights(&[1i128, 1, 1]),
            Err(LaminateError::InexactHalf)
        );
    }

    #[test]
    fn aligned_feet() {
        let feet = [Foot::right(Side::One, 3.0), Foot::right(Side::Two, 3.0)];
        let arcs = cuff_arc_weights(&feet).unwrap();
        assert_eq!(arcs, vec![3.0, 0.0]);
        assert!(switch_conditions_hold(&feet, &arcs));
    }

    #[test]
    fn imbalance_and_open_cuffs() {
        let feet = [Foot::right(Side::One, 3.0), Foot::right(Side::Two, 2.0)];
        assert!(matches!(
            cuff_arc_weights(&feet),
            Err(LaminateError::SideImbalance { .. })
        ));
        let feet = [
            Foot {
                side: Side::One,
                tangency: Tangency::Left,
                weight: 1.0,
            },
            Foot::right(Side::Two, 1.0),
        ];
        assert_eq!(cuff_arc_weights(&feet), Err(LaminateError::OpenCuff));
    }

    #[test]
    fn mixed_tangency_closes_when_balanced() {
        let feet = [
            Foot {
                side: Side::One,
                tangency: Tangency::Left,
                weight: 2i128,
            },
            Foot::right(Side::One, 1),
            Foot {
                side: Side::Two,
                tangency: Tangency::Left,
                weight: 2,
            },
            Foot::right(Side::Two, 1),
        ];
        let arcs = cuff_arc_weights(&feet).unwrap();
        assert!(switch_conditions_hold(&feet, &arcs));
    }

    #[test]
    fn track_on_a_small_pants_graph() {
        // source pant 0, punctured pant 1 and pant 2, draining to 3
        let net = ConductanceNetwork::new(
            4,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(0, 2, 1.0),
                Edge::new(0, 3, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(2, 3, 2.0),
            ],
        )
        .unwrap();
        let flux = [0.25, 0.25, 0.5, 0.25, 0.5];
        let flow = orient_flow(&net, &flux, VertexId(0), VertexId(3)).unwrap();
        let track = laminate_flow(&flow).unwrap();
        assert_eq!(track.pants.len(), 3);
        for (v, pant) in &track.pants {
            let t: Vec<i128> = pant.cuffs.iter().map(|e| flow.quanta[e.0]).collect();
            assert_eq!(cuff_totals(&pant.connectors, t.len()), t, "pant {v}");
        }
        for cuff in &track.cuffs {
            assert!(switch_conditions_hold(&cuff.feet, &cuff.arcs));
            assert!(cuff.max_arc() <= 2 * cuff.flow);
        }
        assert!(track.max_arc_ratio() <= 2.0);
        let json = serde_json::to_string(&track).unwrap();
        let back: TrainTrackWeights = serde_json::from_str(&json).unwrap();
        assert_eq!(back, track);
    }
}
