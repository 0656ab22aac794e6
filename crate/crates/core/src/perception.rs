//! Simulated vision: few-shot kNN classification, part search, and
//! scene-graph construction.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Concept, HAVE};
use crate::memory::{ExemplarSets, FeatureVec, KnowledgeBase, Memory};
use crate::rng;
use crate::worldsim::{RegionRef, SearchNoise, TrueScene};

pub const K: usize = 5;
pub const EPS: f64 = 1e-6;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance-weighted kNN vote for membership. Exemplars whose dimension
/// differs from the query are ignored. All neighbours tied with the k-th
/// distance are included, which keeps the vote symmetric under swapping
/// the positive and negative sets.
pub fn knn(query: &[f64], sets: &ExemplarSets) -> f64 {
    let mut scored: Vec<(f64, bool)> = sets
        .positives
        .iter()
        .map(|v| (v, true))
        .chain(sets.negatives.iter().map(|v| (v, false)))
        .filter(|(v, _)| v.len() == query.len())
        .map(|(v, pos)| (dist(query, v), pos))
        .collect();
    if scored.is_empty() {
        return 0.5;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = K.min(scored.len());
    let cutoff = scored[k - 1].0;
    let (mut pos, mut all) = (0.0, 0.0);
    for &(d, is_pos) in scored.iter().take_while(|(d, _)| *d <= cutoff) {
        let w = 1.0 / (EPS + d);
        all += w;
        if is_pos {
            pos += w;
        }
    }
    (pos / all).clamp(0.0, 1.0)
}

/// Feature seen through a tuple of references: the region vector for unary
/// concepts, the concatenation plus a containment indicator for binary ones.
pub fn tuple_feature(scene: &TrueScene, refs: &[RegionRef]) -> Result<FeatureVec> {
    match refs {
        [r] => scene.feature_of(r),
        [a, b] => {
            let mut v = scene.feature_of(a)?;
            v.extend(scene.feature_of(b)?);
            v.push(if scene.contains(&a.region, &b.region) { 1.0 } else { 0.0 });
            Ok(v)
        }
        _ => Err(Error::Contract(format!("no feature for a {}-tuple", refs.len()))),
    }
}

/// f_clf: membership probability of `refs` in `concept`.
pub fn f_clf(scene: &TrueScene, refs: &[RegionRef], concept: &Concept, sets: &ExemplarSets) -> Result<f64> {
    if refs.len() != concept.arity as usize {
        return Err(Error::Contract(format!(
            "{} has arity {} but {} reference(s) were given",
            concept.id,
            concept.arity,
            refs.len()
        )));
    }
    if sets.is_empty() {
        return Ok(0.5);
    }
    Ok(knn(&tuple_feature(scene, refs)?, sets))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub region: RegionRef,
    /// f_clf re-score of the proposal.
    pub score: f64,
    /// The corruption model replaced or degraded this proposal.
    pub corrupted: bool,
}

/// Probability that part search corrupts its top proposal.
pub fn corruption_probability(noise: &SearchNoise, positives: usize) -> f64 {
    noise.q0 * (-(positives as f64) / noise.tau).exp()
}

const RESCORED: usize = 3;

/// f_seg: candidate regions for `concept`, best first.
///
/// With no positive exemplars every region comes back at full fidelity with
/// score 0.5. Otherwise regions are ranked by distance to the positive
/// centroid, the top one may be corrupted, and the top three are re-scored
/// with f_clf. `seed` drives only the corruption model.
pub fn f_seg(scene: &TrueScene, concept: &Concept, sets: &ExemplarSets, noise: &SearchNoise, seed: u64) -> Result<Vec<Proposal>> {
    let regions: Vec<_> = scene.regions().collect();
    let dim = regions.first().map_or(0, |r| r.feature.len());
    let positives: Vec<&FeatureVec> = sets.positives.iter().filter(|v| v.len() == dim).collect();
    if positives.is_empty() {
        return Ok(regions
            .iter()
            .map(|r| Proposal {
                region: RegionRef {
                    region: r.id.clone(),
                    fidelity: 1.0,
                    proposed: true,
                },
                score: 0.5,
                corrupted: false,
            })
            .collect());
    }
    let mut centroid = vec![0.0; dim];
    for v in &positives {
        for (c, x) in centroid.iter_mut().zip(v.iter()) {
            *c += x / positives.len() as f64;
        }
    }
    let mut ranked: Vec<(f64, &str)> = regions.iter().map(|r| (dist(&r.feature, &centroid), r.id.as_str())).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut rng = rng::rng(seed);
    let mut out: Vec<Proposal> = ranked
        .iter()
        .map(|(_, id)| Proposal {
            region: RegionRef {
                region: id.to_string(),
                fidelity: rng.random_range(0.9..=1.0),
                proposed: true,
            },
            score: 0.5,
            corrupted: false,
        })
        .collect();
    let q = corruption_probability(noise, positives.len());
    if rng.random::<f64>() < q {
        if rng.random::<bool>() && out.len() > 1 {
            let j = rng.random_range(1..out.len());
            out.swap(0, j);
        } else {
            out[0].region.fidelity = rng.random_range(0.0..0.5);
        }
        out[0].corrupted = true;
    }
    for p in out.iter_mut().take(RESCORED) {
        p.score = f_clf(scene, std::slice::from_ref(&p.region), concept, sets)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    /// Constant naming the vertex in programs (object or region id).
    pub id: String,
    pub region: RegionRef,
    /// Belief per registered unary concept.
    pub beliefs: BTreeMap<String, f64>,
    /// Part concepts whose search produced this vertex.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub searched_for: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Belief per registered binary concept.
    pub beliefs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Index of the classification target.
    pub target: usize,
}

impl SceneGraph {
    pub fn target(&self) -> &Vertex {
        &self.vertices[self.target]
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Part-proposal vertices (everything but the target).
    pub fn proposals(&self) -> impl Iterator<Item = &Vertex> {
        let t = self.target;
        self.vertices.iter().enumerate().filter(move |(i, _)| *i != t).map(|(_, v)| v)
    }

    /// Vertices proposed by the search for `part`.
    pub fn candidates_for<'a>(&'a self, part: &'a str) -> impl Iterator<Item = &'a Vertex> + 'a {
        self.proposals().filter(move |v| v.searched_for.iter().any(|c| c == part))
    }
}

/// `have(o,p)` evidence from mask containment: high when the proposal lies
/// inside the object, scaled by mask quality; low otherwise.
pub fn containment(scene: &TrueScene, whole: &RegionRef, part: &RegionRef) -> f64 {
    if scene.contains(&whole.region, &part.region) {
        0.5 + 0.49 * part.fidelity.clamp(0.0, 1.0)
    } else {
        0.05
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub noise: SearchNoise,
    /// Proposals kept per searched part concept.
    pub per_part: usize,
    /// Seed of this scene's corruption streams.
    pub seed: u64,
}

/// Builds the scene graph for classifying `target`. Part search runs for
/// every part concept the KB links to a registered whole type.
pub fn build_scene_graph(
    scene: &TrueScene,
    target: &RegionRef,
    memory: &Memory,
    kb: &KnowledgeBase,
    search: &SearchSettings,
) -> Result<SceneGraph> {
    let empty = ExemplarSets::default();
    let sets = |c: &str| memory.xb.get(c).unwrap_or(&empty);
    let mut vertices = vec![Vertex {
        id: target.region.clone(),
        region: target.clone(),
        beliefs: BTreeMap::new(),
        searched_for: Vec::new(),
    }];
    let wholes: Vec<&str> = memory.whole_types().iter().map(|c| c.id.as_str()).collect();
    for part in kb.relevant_parts(wholes) {
        let Some(concept) = memory.concept(&part) else {
            continue;
        };
        let seed = rng::derive(search.seed, &format!("search/{part}"), 0);
        let found = f_seg(scene, concept, sets(&part), &search.noise, seed)?;
        for p in found.into_iter().take(search.per_part) {
            if p.region.region == target.region {
                continue;
            }
            if let Some(v) = vertices.iter_mut().find(|v| v.region.region == p.region.region) {
                v.searched_for.push(part.clone());
                continue;
            }
            vertices.push(Vertex {
                id: p.region.region.clone(),
                region: p.region,
                beliefs: BTreeMap::new(),
                searched_for: vec![part.clone()],
            });
        }
    }
    for v in &mut vertices {
        for c in memory.unary_concepts() {
            let p = f_clf(scene, std::slice::from_ref(&v.region), c, sets(&c.id))?;
            v.beliefs.insert(c.id.clone(), p);
        }
    }
    let mut edges = Vec::new();
    for i in 0..vertices.len() {
        for j in 0..vertices.len() {
            if i == j {
                continue;
            }
            let mut beliefs = BTreeMap::new();
            for c in memory.concepts.values().filter(|c| c.arity == 2) {
                let p = if c.id == HAVE {
                    containment(scene, &vertices[i].region, &vertices[j].region)
                } else {
                    f_clf(scene, &[vertices[i].region.clone(), vertices[j].region.clone()], c, sets(&c.id))?
                };
                beliefs.insert(c.id.clone(), p);
            }
            edges.push(Edge { from: i, to: j, beliefs });
        }
    }
    Ok(SceneGraph {
        vertices,
        edges,
        target: 0,
    })
}
