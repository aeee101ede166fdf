//! Stylistics-aware routing.
//!
//! Each style's compressed embeddings are clustered into `K` prototypes with
//! balanced optimal-transport assignments and momentum updates. At query
//! time the `m` nearest prototypes, pooled across all styles, activate their
//! member samples as the reference set for threshold estimation.

mod sinkhorn;

pub use sinkhorn::{sinkhorn_assign, SinkhornConfig, TransportPlan};

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repository::Repository;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrototypeConfig {
    pub k: usize,
    pub momentum: f64,
    pub epochs: usize,
    pub sinkhorn: SinkhornConfig,
}

impl Default for PrototypeConfig {
    fn default() -> Self {
        Self {
            k: 8,
            momentum: 0.9,
            epochs: 10,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl PrototypeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1]"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.sinkhorn.epsilon > 0.0) {
            return Err(Error::invalid("sinkhorn epsilon must be positive"));
        }
        if self.sinkhorn.max_iter == 0 {
            return Err(Error::invalid("sinkhorn max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleIndex {
    pub style: String,
    pub prototypes: Vec<Vec<f64>>,
    /// Sample ids per prototype, from the last epoch's hardened assignment.
    pub members: Vec<Vec<String>>,
    /// The relaxed plan of the last epoch, `K × N` with columns in `point_ids` order.
    pub assignment: Vec<Vec<f64>>,
    pub point_ids: Vec<String>,
    pub converged: bool,
}

impl StyleIndex {
    pub fn k(&self) -> usize {
        self.prototypes.len()
    }

    /// One prototype at the mean of all points, owning every sample.
    pub fn pooled(style: &str, ids: Vec<String>, points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let dim = points[0].len();
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / points.len() as f64;
            }
        }
        let share = 1.0 / points.len() as f64;
        Ok(Self {
            style: style.to_owned(),
            prototypes: vec![mean],
            members: vec![ids.clone()],
            assignment: vec![vec![share; points.len()]],
            point_ids: ids,
            converged: true,
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Clusters one style's points. `ids[i]` names `points[i]`.
pub fn fit_prototypes(
    style: &str,
    ids: &[String],
    points: &[Vec<f64>],
    config: &PrototypeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StyleIndex> {
    config.validate()?;
    let n = points.len();
    let k = config.k;
    if n < k {
        return Err(Error::TooFewSamples {
            style: style.to_owned(),
            available: n,
            required: k,
        });
    }
    let dim = points[0].len();

    let mut picks = index::sample(rng, n, k).into_vec();
    picks.sort_unstable();
    let mut prototypes: Vec<Vec<f64>> = picks.iter().map(|&i| points[i].clone()).collect();

    let mut plan = None;
    let mut assign = Vec::new();
    for _ in 0..config.epochs {
        let current = sinkhorn_assign(points, &prototypes, &config.sinkhorn)?;
        assign = current.harden();
        reseed_empty(points, &mut prototypes, &mut assign);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += v;
            }
        }
        for ((p, sum), &count) in prototypes.iter_mut().zip(&sums).zip(&counts) {
            for (pv, sv) in p.iter_mut().zip(sum) {
                let mean = sv / count as f64;
                *pv = config.momentum * *pv + (1.0 - config.momentum) * mean;
            }
        }
        plan = Some(current);
    }
    let plan = plan.expect("epochs >= 1");

    let mut members = vec![Vec::new(); k];
    for (id, &c) in ids.iter().zip(&assign) {
        members[c].push(id.clone());
    }

    Ok(StyleIndex {
        style: style.to_owned(),
        prototypes,
        members,
        assignment: plan.plan,
        point_ids: ids.to_vec(),
        converged: plan.converged,
    })
}

/// Gives every empty cluster the point farthest from its own prototype,
/// taken from a cluster that can spare one.
fn reseed_empty(points: &[Vec<f64>], prototypes: &mut [Vec<f64>], assign: &mut [usize]) {
    let k = prototypes.len();
    let mut counts = vec![0usize; k];
    for &c in assign.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in points.iter().enumerate() {
            if counts[assign[i]] < 2 {
                continue;
            }
            let d = sq_dist(x, &prototypes[assign[i]]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { break };
        counts[assign[i]] -= 1;
        counts[empty] += 1;
        assign[i] = empty;
        prototypes[empty] = points[i].clone();
    }
}

/// Fits one index per style of the repository, each from its own RNG stream.
pub fn fit_repository(
    repo: &Repository,
    config: &PrototypeConfig,
    seed: u64,
) -> Result<Vec<StyleIndex>> {
    repo.styles
        .iter()
        .enumerate()
        .map(|(stream, style)| {
            let (ids, points): (Vec<String>, Vec<Vec<f64>>) = repo
                .samples_of_style(style)
                .map(|s| (s.id.clone(), s.conditions.semantic.clone()))
                .unzip();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream as u64);
            fit_prototypes(style, &ids, &points, config, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrototypeId {
    pub style: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeRef {
    pub style: String,
    pub index: usize,
    pub distance: f64,
}

impl PrototypeRef {
    pub fn id(&self) -> PrototypeId {
        PrototypeId {
            style: self.style.clone(),
            index: self.index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    /// Nondecreasing in distance.
    pub prototypes: Vec<PrototypeRef>,
    /// Sorted, deduplicated union of the activated member lists.
    pub sample_ids: Vec<String>,
    pub distance_evaluations: usize,
}

impl Activation {
    /// Sorted prototype ids, the identity of the activated reference set.
    pub fn key(&self) -> Vec<PrototypeId> {
        let mut key: Vec<PrototypeId> = self.prototypes.iter().map(PrototypeRef::id).collect();
        key.sort();
        key
    }
}

fn rank_all(indexes: &[StyleIndex], query: &[f64]) -> Result<Vec<PrototypeRef>> {
    let mut refs = Vec::new();
    for idx in indexes {
        for (i, p) in idx.prototypes.iter().enumerate() {
            if p.len() != query.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    actual: query.len(),
                });
            }
            refs.push(PrototypeRef {
                style: idx.style.clone(),
                index: i,
                distance: sq_dist(p, query).sqrt(),
            });
        }
    }
    if refs.is_empty() {
        return Err(Error::EmptyIndex);
    }
    refs.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.style.cmp(&b.style))
            .then(a.index.cmp(&b.index))
    });
    Ok(refs)
}

fn members_of<'a>(
    indexes: &'a [StyleIndex],
    refs: &[PrototypeRef],
) -> impl Iterator<Item = &'a String> + 'a {
    let wanted: Vec<(String, usize)> = refs.iter().map(|r| (r.style.clone(), r.index)).collect();
    indexes.iter().flat_map(move |idx| {
        let picked: Vec<usize> = wanted
            .iter()
            .filter(|(s, _)| *s == idx.style)
            .map(|(_, i)| *i)
            .collect();
        picked.into_iter().flat_map(move |i| idx.members[i].iter())
    })
}

/// Activates the `m` nearest prototypes across every style.
pub fn route(indexes: &[StyleIndex], query: &[f64], m: usize) -> Result<Activation> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let mut refs = rank_all(indexes, query)?;
    let evaluated = refs.len();
    if m > evaluated {
        return Err(Error::invalid(format!(
            "m = {m} exceeds the {evaluated} available prototypes"
        )));
    }
    refs.truncate(m);
    let sample_ids: BTreeSet<String> = members_of(indexes, &refs).cloned().collect();
    Ok(Activation {
        prototypes: refs,
        sample_ids: sample_ids.into_iter().collect(),
        distance_evaluations: evaluated,
    })
}

/// Treats the nearest prototype as a style vote and activates the whole style.
pub fn route_by_classification(indexes: &[StyleIndex], query: &[f64]) -> Result<Activation> {
    let refs = rank_all(indexes, query)?;
    let evaluated = refs.len();
    let style = refs[0].style.clone();
    let refs: Vec<PrototypeRef> = refs.into_iter().filter(|r| r.style == style).collect();
    let sample_ids: BTreeSet<String> = members_of(indexes, &refs).cloned().collect();
    Ok(Activation {
        prototypes: refs,
        sample_ids: sample_ids.into_iter().collect(),
        distance_evaluations: evaluated,
    })
}
